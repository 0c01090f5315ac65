//! Distributed asynchronous online MDS (doMDS).
//!
//! Each node i owns one row U_n(i) of the eigenvector iterate plus its
//! eigenvalue vector λ_n(i). A tick consists of a measurement phase and two
//! single-node broadcasts governed by an asynchronous transmission sequence
//! (ATS): the first broadcaster ι_n shares (U_{n−1}(ι_n), S̄_n(ι_n)), after
//! which every node forms
//!
//! ```text
//! δ_n(i)   = S̄_n(i)/N + S̄_n(ι_n) Q_{n,i} / q
//! M̂_n(i,j) = (S̄_n(i)+S̄_n(j))/2 − (S_n(i,j)+δ_n(i))/2
//! Y_n(i)   = M̂_n(i,i) U_{n−1}(i) + (N/q) U_{n−1}(ι_n) M̂_n(i,ι_n) Q_{n,i}
//! ```
//!
//! The second broadcaster ι′_n shares U_{n−1}(ι′_n)ᵀY_n(ι′_n), giving
//!
//! ```text
//! Λ_n(i) = U_{n−1}(i)ᵀY_n(i) + (N/q) U_{n−1}(ι′_n)ᵀY_n(ι′_n) Q′_{n,i}
//! U_n(i) = Π_K[U_{n−1}(i) + γ_n (Y_n(i) − U_{n−1}(i)Λ_n(i))]
//! λ_n(i) = λ_{n−1}(i) + γ_n (diag(Λ_n(i)) − λ_{n−1}(i))
//! ```
//!
//! Two estimator variants are provided. `Literal` reuses the first ATS draw
//! inside δ_n(i) exactly as the recursion is usually written; because the
//! same reception flag then appears both inside δ_n(i) and as the factor
//! Q_{n,i}, Y_n(i) carries a small bias. `Decoupled` spends one extra scalar
//! broadcast on an independent ATS draw dedicated to δ_n(i), which makes
//! E[Y_n] = MU and E[Λ_n] = UᵀMU hold exactly; the unbiasedness tests run on
//! this variant and a diagnostic measures the literal variant's bias.

use crate::channel::{ObservationSampler, SparseObservation};
use crate::error::{Error, Result};
use crate::oja::ProjectionBox;
use crate::{DMat, DRowVec, DVec};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// One draw of the asynchronous transmission sequence: a uniformly chosen
/// broadcaster and independent Bernoulli(q) reception flags, with the
/// broadcaster's own flag forced to 0.
#[derive(Debug, Clone, PartialEq)]
pub struct AtsEvent {
    pub broadcaster: usize,
    pub received: Vec<bool>,
    pub q: f64,
}

impl AtsEvent {
    /// Did node `i` receive this broadcast?
    #[inline]
    pub fn delivered(&self, i: usize) -> bool {
        self.received[i]
    }

    pub fn delivered_count(&self) -> u64 {
        self.received.iter().filter(|&&r| r).count() as u64
    }
}

/// Draw one ATS event.
pub fn sample_ats<R: Rng>(n_nodes: usize, q: f64, rng: &mut R) -> Result<AtsEvent> {
    if n_nodes < 2 {
        return Err(Error::invalid("ats.n_nodes", format!("need at least 2 nodes, got {n_nodes}")));
    }
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::config("ats.q", format!("reception probability must be in (0, 1), got {q}")));
    }
    let broadcaster = rng.random_range(0..n_nodes);
    let received = (0..n_nodes)
        .map(|i| i != broadcaster && rng.random::<f64>() < q)
        .collect();
    Ok(AtsEvent { broadcaster, received, q })
}

/// Per-node protocol state. Only this struct plus explicitly received
/// messages may influence a node's update.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeState {
    pub node_id: usize,
    /// U_n(i), the node's 1×p row of the eigenvector iterate.
    pub u_row: DRowVec,
    /// λ_n(i), the node's local eigenvalue estimates.
    pub lambda: DVec,
    /// S̄_n(i), the most recent local row average (m²).
    pub last_row_avg: f64,
}

/// Payload of the first broadcast: p + 1 scalars.
#[derive(Debug, Clone, PartialEq)]
pub struct Phase1Msg {
    pub sender: usize,
    pub u_row: DRowVec,
    pub row_avg: f64,
}

/// Payload of the second broadcast: the p×p product U_{n−1}(ι′)ᵀY_n(ι′).
#[derive(Debug, Clone, PartialEq)]
pub struct Phase2Msg {
    pub sender: usize,
    pub product: DMat,
}

/// Payload of the optional δ-dedicated broadcast (decoupled variant): 1 scalar.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeltaMsg {
    pub sender: usize,
    pub row_avg: f64,
}

/// Which δ estimator the protocol runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DomdsVariant {
    /// δ_n(i) reuses the phase-1 ATS draw (2 broadcasts per tick).
    Literal,
    /// δ_n(i) gets its own independent ATS draw and a one-scalar broadcast
    /// (3 broadcasts per tick); makes Y_n and Λ_n exactly unbiased.
    Decoupled,
}

/// Communication cost counters for one protocol run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CommStats {
    pub ticks: u64,
    pub broadcasts_sent: u64,
    pub messages_delivered: u64,
    pub scalars_transmitted: u64,
}

/// Initial network: U₀ rows uniform in [−1, 1]^p, λ₀ = 0.
pub fn init_network<R: Rng>(n: usize, p: usize, rng: &mut R) -> Vec<NodeState> {
    (0..n)
        .map(|node_id| NodeState {
            node_id,
            u_row: DRowVec::from_fn(p, |_, _| rng.random::<f64>() * 2.0 - 1.0),
            lambda: DVec::zeros(p),
            last_row_avg: 0.0,
        })
        .collect()
}

/// δ_n(i) = S̄_n(i)/N + S̄_n(ι_n)/q when the broadcaster's row average was
/// received, S̄_n(i)/N otherwise.
pub fn delta_estimate(own_row_avg: f64, n_nodes: usize, received_row_avg: Option<f64>, q: f64) -> f64 {
    let mut delta = own_row_avg / n_nodes as f64;
    if let Some(remote) = received_row_avg {
        delta += remote / q;
    }
    delta
}

/// M̂_n(i,j) = (S̄_n(i)+S̄_n(j))/2 − (S_n(i,j)+δ_n(i))/2.
pub fn mhat_entry(row_avg_i: f64, row_avg_j: f64, s_ij: f64, delta_i: f64) -> f64 {
    0.5 * (row_avg_i + row_avg_j) - 0.5 * (s_ij + delta_i)
}

/// Y_n(i) = M̂_n(i,i)U_{n−1}(i) + (N/q)U_{n−1}(ι_n)M̂_n(i,ι_n)Q_{n,i}.
///
/// `s_i_sender` is node i's own observation entry S_n(i, ι_n); it is only
/// read when the phase-1 message was delivered.
pub fn compute_y(
    node: &NodeState,
    delta_i: f64,
    ats: &AtsEvent,
    msg1: Option<&Phase1Msg>,
    s_i_sender: f64,
    n_nodes: usize,
) -> Result<DRowVec> {
    let mhat_ii = mhat_entry(node.last_row_avg, node.last_row_avg, 0.0, delta_i);
    let mut y = &node.u_row * mhat_ii;
    if ats.delivered(node.node_id) {
        let msg = msg1.ok_or_else(|| {
            Error::Protocol(format!(
                "node {} has reception flag set but no phase-1 message",
                node.node_id
            ))
        })?;
        let mhat_is = mhat_entry(node.last_row_avg, msg.row_avg, s_i_sender, delta_i);
        y += &msg.u_row * (n_nodes as f64 / ats.q * mhat_is);
    }
    Ok(y)
}

/// Λ_n(i) = U_{n−1}(i)ᵀY_n(i) + (N/q)·(U_{n−1}(ι′)ᵀY_n(ι′))·Q′_{n,i}.
pub fn compute_lambda_matrix(
    node: &NodeState,
    y_i: &DRowVec,
    ats2: &AtsEvent,
    msg2: Option<&Phase2Msg>,
    n_nodes: usize,
) -> Result<DMat> {
    let mut lam = node.u_row.transpose() * y_i; // p×p rank-1 local term
    if ats2.delivered(node.node_id) {
        let msg = msg2.ok_or_else(|| {
            Error::Protocol(format!(
                "node {} has reception flag set but no phase-2 message",
                node.node_id
            ))
        })?;
        lam += &msg.product * (n_nodes as f64 / ats2.q);
    }
    Ok(lam)
}

/// Apply both local recursions of one tick; the row is clamped to the box.
pub fn node_update(
    node: &NodeState,
    y: &DRowVec,
    lam_mat: &DMat,
    gamma: f64,
    bx: &ProjectionBox,
) -> NodeState {
    let mut u_row = &node.u_row + gamma * (y - &node.u_row * lam_mat);
    for v in u_row.iter_mut() {
        *v = bx.clamp(*v);
    }
    let lambda = DVec::from_fn(node.lambda.len(), |k, _| {
        node.lambda[k] + gamma * (lam_mat[(k, k)] - node.lambda[k])
    });
    NodeState {
        node_id: node.node_id,
        u_row,
        lambda,
        last_row_avg: node.last_row_avg,
    }
}

/// Local position readout Ẑ_n(i)_k = √max(λ_{n,k}(i), 0) · u_{n,k}(i).
///
/// Slots are read out in place: a node has no global view of the spectrum,
/// so unlike the centralized readout no λ-sorting is applied (per-node
/// sorting would scramble coordinate axes across the network).
pub fn node_position(node: &NodeState) -> DRowVec {
    DRowVec::from_fn(node.u_row.len(), |_, k| {
        node.lambda[k].max(0.0).sqrt() * node.u_row[k]
    })
}

/// Per-tick random streams, one per randomness purpose so the draw schedule
/// of one purpose can never shift another.
pub struct TickRngs {
    pub observation: ChaCha8Rng,
    pub ats_primary: ChaCha8Rng,
    pub ats_secondary: ChaCha8Rng,
    pub ats_delta: ChaCha8Rng,
}

/// Execute one full doMDS tick over the network.
///
/// Phases: measure → phase-1 broadcast (and δ-broadcast if decoupled) →
/// every node forms Y_n(i) → phase-2 broadcast → every node updates.
#[allow(clippy::too_many_arguments)]
pub fn domds_round(
    nodes: &mut [NodeState],
    sampler: &ObservationSampler,
    obs: &mut SparseObservation,
    ats_q: f64,
    gamma: f64,
    bx: &ProjectionBox,
    variant: DomdsVariant,
    rngs: &mut TickRngs,
    stats: &mut CommStats,
) -> Result<()> {
    let n = nodes.len();
    if n < 2 {
        return Err(Error::invalid("domds.n_nodes", format!("need at least 2 nodes, got {n}")));
    }
    let p = nodes[0].u_row.len();

    // Phase 0: fresh local measurements.
    sampler.sample_into(obs, &mut rngs.observation);
    for node in nodes.iter_mut() {
        node.last_row_avg = obs.row_avg[node.node_id];
    }

    // Phase 1 broadcast.
    let ats1 = sample_ats(n, ats_q, &mut rngs.ats_primary)?;
    let msg1 = Phase1Msg {
        sender: ats1.broadcaster,
        u_row: nodes[ats1.broadcaster].u_row.clone(),
        row_avg: nodes[ats1.broadcaster].last_row_avg,
    };

    // Optional δ-dedicated broadcast.
    let delta_bcast = match variant {
        DomdsVariant::Literal => None,
        DomdsVariant::Decoupled => {
            let ats = sample_ats(n, ats_q, &mut rngs.ats_delta)?;
            let msg = DeltaMsg {
                sender: ats.broadcaster,
                row_avg: nodes[ats.broadcaster].last_row_avg,
            };
            Some((ats, msg))
        }
    };

    // Every node forms its Y_n(i).
    let mut ys: Vec<DRowVec> = Vec::with_capacity(n);
    for node in nodes.iter() {
        let i = node.node_id;
        let delta_i = match (&variant, &delta_bcast) {
            (DomdsVariant::Literal, _) => delta_estimate(
                node.last_row_avg,
                n,
                ats1.delivered(i).then_some(msg1.row_avg),
                ats1.q,
            ),
            (DomdsVariant::Decoupled, Some((ats_d, msg_d))) => delta_estimate(
                node.last_row_avg,
                n,
                ats_d.delivered(i).then_some(msg_d.row_avg),
                ats_d.q,
            ),
            (DomdsVariant::Decoupled, None) => unreachable!(),
        };
        let s_i_sender = obs.s[(i, ats1.broadcaster)];
        ys.push(compute_y(node, delta_i, &ats1, Some(&msg1), s_i_sender, n)?);
    }

    // Phase 2 broadcast.
    let ats2 = sample_ats(n, ats_q, &mut rngs.ats_secondary)?;
    let msg2 = Phase2Msg {
        sender: ats2.broadcaster,
        product: nodes[ats2.broadcaster].u_row.transpose() * &ys[ats2.broadcaster],
    };

    // Local updates.
    for i in 0..n {
        let lam = compute_lambda_matrix(&nodes[i], &ys[i], &ats2, Some(&msg2), n)?;
        nodes[i] = node_update(&nodes[i], &ys[i], &lam, gamma, bx);
    }

    // Cost accounting: payload sizes are per broadcast, independent of N.
    stats.ticks += 1;
    stats.messages_delivered += ats1.delivered_count() + ats2.delivered_count();
    stats.broadcasts_sent += 2;
    stats.scalars_transmitted += (p as u64 + 1) + (p as u64) * (p as u64);
    if let Some((ats_d, _)) = &delta_bcast {
        stats.broadcasts_sent += 1;
        stats.scalars_transmitted += 1;
        stats.messages_delivered += ats_d.delivered_count();
    }
    Ok(())
}

/// Assemble the network-wide position estimate (row i = node i's readout).
pub fn network_positions(nodes: &[NodeState]) -> DMat {
    let n = nodes.len();
    let p = if n == 0 { 0 } else { nodes[0].u_row.len() };
    let mut out = DMat::zeros(n, p);
    for node in nodes {
        let pos = node_position(node);
        for k in 0..p {
            out[(node.node_id, k)] = pos[k];
        }
    }
    out
}
