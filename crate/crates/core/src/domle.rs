//! Distributed online maximum-likelihood refinement (doMLE).
//!
//! Starting from an initial configuration (typically the doMDS output mapped
//! into absolute coordinates), every node i keeps a local map of position
//! estimates for itself and its non-anchor neighbors and descends the
//! least-squares criterion over log-distances
//!
//! ```text
//! f_i(z) = Σ_{j∈N_i} (ℓ̂_ij − log₁₀‖z_i−z_j‖)² + Σ_{k∈M_i} (ℓ̂_ik − log₁₀‖z_i−a_k‖)²
//! ```
//!
//! where ℓ̂_ij = (−P_ij − PL₀)/(10η) is the log-distance read off a fresh
//! RSSI sample (its noise is Gaussian with variance σ²/(100η²)), N_i are
//! non-anchor neighbors, and M_i anchor neighbors with known positions a_k.
//! One round takes a gradient step at every node and then lets one uniformly
//! chosen non-anchor edge average the copies of their common non-anchor
//! neighbors' positions (pairwise gossip).

use crate::channel::{sample_mean_rssi, ChannelParams};
use crate::error::{Error, Result};
use crate::mds::Scenario;
use crate::{DMat, DRowVec};
use rand::seq::IndexedRandom;
use rand::Rng;
use std::collections::BTreeMap;

/// Distances are floored at this value (meters) inside logs and gradient
/// denominators; colliding estimates would otherwise send both to infinity.
pub const D_MIN_M: f64 = 1e-3;

/// Connectivity structure of the refinement stage.
#[derive(Debug, Clone)]
pub struct LocalizationGraph {
    n: usize,
    /// Undirected edges, stored with i < j, lexicographically sorted.
    edges: Vec<(usize, usize)>,
    adj: Vec<Vec<usize>>,
    anchor_flags: Vec<bool>,
    anchors: Vec<usize>,
    /// Edges whose both endpoints are non-anchors (gossip-eligible).
    gossip_edges: Vec<(usize, usize)>,
}

impl LocalizationGraph {
    /// Build from an explicit edge list.
    pub fn from_edges(n: usize, mut edges: Vec<(usize, usize)>, anchors: Vec<usize>) -> Result<Self> {
        if n < 2 {
            return Err(Error::invalid("graph.n_nodes", format!("need at least 2 nodes, got {n}")));
        }
        for e in edges.iter_mut() {
            if e.0 == e.1 || e.0 >= n || e.1 >= n {
                return Err(Error::invalid("graph.edges", format!("bad edge {e:?} for {n} nodes")));
            }
            if e.0 > e.1 {
                *e = (e.1, e.0);
            }
        }
        edges.sort_unstable();
        edges.dedup();
        let mut anchor_flags = vec![false; n];
        let mut anchors = anchors;
        anchors.sort_unstable();
        anchors.dedup();
        for &a in &anchors {
            if a >= n {
                return Err(Error::invalid("graph.anchors", format!("anchor {a} out of range")));
            }
            anchor_flags[a] = true;
        }
        let mut adj = vec![Vec::new(); n];
        for &(i, j) in &edges {
            adj[i].push(j);
            adj[j].push(i);
        }
        for list in adj.iter_mut() {
            list.sort_unstable();
        }
        let graph = LocalizationGraph {
            n,
            gossip_edges: edges
                .iter()
                .copied()
                .filter(|&(i, j)| !anchor_flags[i] && !anchor_flags[j])
                .collect(),
            edges,
            adj,
            anchor_flags,
            anchors,
        };
        if !graph.is_connected() {
            return Err(Error::Disconnected(
                "localization graph is not connected; increase the radio radius".into(),
            ));
        }
        Ok(graph)
    }

    /// Default construction: connect every pair within radio radius `r`.
    pub fn from_radius(scenario: &Scenario, r: f64) -> Result<Self> {
        if r.is_nan() || r <= 0.0 {
            return Err(Error::invalid("graph.radius", format!("must be > 0, got {r}")));
        }
        let n = scenario.n();
        let mut edges = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                if scenario.distance(i, j) <= r {
                    edges.push((i, j));
                }
            }
        }
        Self::from_edges(n, edges, scenario.anchors().to_vec())
    }

    fn is_connected(&self) -> bool {
        let mut seen = vec![false; self.n];
        let mut stack = vec![0usize];
        seen[0] = true;
        let mut count = 1;
        while let Some(i) = stack.pop() {
            for &j in &self.adj[i] {
                if !seen[j] {
                    seen[j] = true;
                    count += 1;
                    stack.push(j);
                }
            }
        }
        count == self.n
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn anchors(&self) -> &[usize] {
        &self.anchors
    }

    pub fn is_anchor(&self, i: usize) -> bool {
        self.anchor_flags[i]
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.adj[i]
    }

    /// N_i: non-anchor neighbors of i.
    pub fn nonanchor_neighbors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.adj[i].iter().copied().filter(|&j| !self.anchor_flags[j])
    }

    /// M_i: anchor neighbors of i.
    pub fn anchor_neighbors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.adj[i].iter().copied().filter(|&j| self.anchor_flags[j])
    }

    /// Edges eligible for gossip (both endpoints non-anchor).
    pub fn gossip_edges(&self) -> &[(usize, usize)] {
        &self.gossip_edges
    }
}

/// Node i's private copies of position estimates: its own plus one per
/// non-anchor neighbor. Anchors are never stored (their positions are known).
#[derive(Debug, Clone, PartialEq)]
pub struct LocalMap {
    pub owner: usize,
    pub estimates: BTreeMap<usize, DRowVec>,
}

impl LocalMap {
    /// Build node i's map from a global configuration (row ℓ = position ℓ).
    /// Anchor owners get an empty map: their position is known, not estimated.
    pub fn from_configuration(owner: usize, graph: &LocalizationGraph, config: &DMat) -> Self {
        let mut estimates = BTreeMap::new();
        if !graph.is_anchor(owner) {
            estimates.insert(owner, config.row(owner).clone_owned());
            for j in graph.nonanchor_neighbors(owner) {
                estimates.insert(j, config.row(j).clone_owned());
            }
        }
        LocalMap { owner, estimates }
    }

    pub fn own_position(&self) -> &DRowVec {
        &self.estimates[&self.owner]
    }
}

/// Fresh per-edge log-distance observations for one tick, aligned with
/// `LocalizationGraph::edges` (one shared draw per undirected edge).
#[derive(Debug, Clone)]
pub struct EdgeResiduals {
    pub values: Vec<f64>,
    pub tick: u64,
}

impl EdgeResiduals {
    /// Sample every edge's RSSI at the true distance and convert to
    /// log₁₀-distance units.
    pub fn sample<R: Rng>(
        graph: &LocalizationGraph,
        scenario: &Scenario,
        params: &ChannelParams,
        tick: u64,
        rng: &mut R,
    ) -> Result<Self> {
        let mut values = Vec::with_capacity(graph.edges().len());
        for &(i, j) in graph.edges() {
            let p = sample_mean_rssi(scenario.distance(i, j), params, rng)?;
            values.push(log_residual(p, params));
        }
        Ok(EdgeResiduals { values, tick })
    }

    /// ℓ̂ for edge {i, j}; edges are sorted so lookup is a binary search.
    pub fn get(&self, graph: &LocalizationGraph, i: usize, j: usize) -> Option<f64> {
        let key = if i < j { (i, j) } else { (j, i) };
        graph
            .edges()
            .binary_search(&key)
            .ok()
            .map(|idx| self.values[idx])
    }
}

/// Convert one RSSI reading into log₁₀-distance units:
/// ℓ̂ = (−P − PL₀)/(10η), normally distributed around log₁₀ d with
/// variance σ²/(100η²).
pub fn log_residual(p_rssi: f64, params: &ChannelParams) -> f64 {
    (-p_rssi - params.pl0) / (10.0 * params.eta)
}

/// Distance between two estimates with the collision guard applied.
/// An exact collision is reported as an error; positive distances below
/// `D_MIN_M` are floored.
fn guarded_distance(a: &DRowVec, b: &DRowVec) -> Result<f64> {
    let d = (a - b).norm();
    if d == 0.0 {
        return Err(Error::Singularity(
            "coincident position estimates inside a log-distance term".into(),
        ));
    }
    Ok(d.max(D_MIN_M))
}

/// f_i evaluated on node i's local map.
pub fn local_cost(
    i: usize,
    map: &LocalMap,
    graph: &LocalizationGraph,
    residuals: &EdgeResiduals,
    anchor_positions: &DMat,
) -> Result<f64> {
    debug_assert_eq!(i, map.owner);
    let z_i = map.own_position();
    let mut cost = 0.0;
    for j in graph.nonanchor_neighbors(i) {
        let lhat = residuals.get(graph, i, j).expect("edge has a residual");
        let d = guarded_distance(z_i, &map.estimates[&j])?;
        cost += (lhat - d.log10()).powi(2);
    }
    for k in graph.anchor_neighbors(i) {
        let lhat = residuals.get(graph, i, k).expect("edge has a residual");
        let a_k = anchor_positions.row(k).clone_owned();
        let d = guarded_distance(z_i, &a_k)?;
        cost += (lhat - d.log10()).powi(2);
    }
    Ok(cost)
}

/// Analytic gradient of f_i with respect to every unknown in the map.
///
/// For the pair term with residual r = ℓ̂ − log₁₀ d at distance d:
/// ∂f/∂z_i = −2r·(z_i−z_j)/(d²·ln 10), and the negated vector on z_j.
pub fn local_gradient(
    i: usize,
    map: &LocalMap,
    graph: &LocalizationGraph,
    residuals: &EdgeResiduals,
    anchor_positions: &DMat,
) -> Result<BTreeMap<usize, DRowVec>> {
    debug_assert_eq!(i, map.owner);
    let p = map.own_position().len();
    let mut grad: BTreeMap<usize, DRowVec> = map
        .estimates
        .keys()
        .map(|&k| (k, DRowVec::zeros(p)))
        .collect();
    let z_i = map.own_position().clone();
    for j in graph.nonanchor_neighbors(i) {
        let lhat = residuals.get(graph, i, j).expect("edge has a residual");
        let z_j = &map.estimates[&j];
        let d = guarded_distance(&z_i, z_j)?;
        let r = lhat - d.log10();
        let coef = -2.0 * r / (d * d * std::f64::consts::LN_10);
        let diff = &z_i - z_j;
        *grad.get_mut(&i).unwrap() += &diff * coef;
        *grad.get_mut(&j).unwrap() -= &diff * coef;
    }
    for k in graph.anchor_neighbors(i) {
        let lhat = residuals.get(graph, i, k).expect("edge has a residual");
        let a_k = anchor_positions.row(k).clone_owned();
        let d = guarded_distance(&z_i, &a_k)?;
        let r = lhat - d.log10();
        let coef = -2.0 * r / (d * d * std::f64::consts::LN_10);
        *grad.get_mut(&i).unwrap() += (&z_i - &a_k) * coef;
    }
    Ok(grad)
}

/// Gradient-descent step on every position in the map.
pub fn local_step(map: &LocalMap, gradient: &BTreeMap<usize, DRowVec>, gamma: f64) -> LocalMap {
    let estimates = map
        .estimates
        .iter()
        .map(|(&k, z)| (k, z - gamma * &gradient[&k]))
        .collect();
    LocalMap { owner: map.owner, estimates }
}

/// Pairwise gossip: both maps replace every shared entry — every index held
/// by both maps, i.e. the owners themselves plus common non-anchor
/// neighbors — with the average of the two copies. The pairwise sum of every
/// shared entry is conserved exactly.
///
/// Including the owners is what reconciles a node's own estimate with the
/// copies its neighbors hold; averaging only common third-party neighbors
/// would let the two families of estimates drift apart indefinitely.
pub fn gossip_step(
    map_i: &LocalMap,
    map_j: &LocalMap,
    graph: &LocalizationGraph,
) -> Result<(LocalMap, LocalMap)> {
    let (i, j) = (map_i.owner, map_j.owner);
    if graph.is_anchor(i) || graph.is_anchor(j) {
        return Err(Error::Protocol(format!("gossip pair ({i},{j}) includes an anchor")));
    }
    if graph.edges().binary_search(&(i.min(j), i.max(j))).is_err() {
        return Err(Error::Protocol(format!("gossip pair ({i},{j}) is not an edge")));
    }
    let mut out_i = map_i.clone();
    let mut out_j = map_j.clone();
    for (&l, z_i) in &map_i.estimates {
        let Some(z_j) = map_j.estimates.get(&l) else {
            continue;
        };
        let avg = (z_i + z_j) / 2.0;
        out_i.estimates.insert(l, avg.clone());
        out_j.estimates.insert(l, avg);
    }
    Ok((out_i, out_j))
}

/// One full refinement round: fresh residuals, a local gradient step at
/// every node, then one uniformly chosen non-anchor edge gossips.
#[allow(clippy::too_many_arguments)]
pub fn domle_round<R: Rng>(
    maps: &mut [LocalMap],
    graph: &LocalizationGraph,
    scenario: &Scenario,
    params: &ChannelParams,
    gamma: f64,
    tick: u64,
    rng_residuals: &mut R,
    rng_gossip: &mut R,
) -> Result<()> {
    if graph.gossip_edges().is_empty() {
        return Err(Error::Protocol(
            "no edge with two non-anchor endpoints; gossip is impossible".into(),
        ));
    }
    let residuals = EdgeResiduals::sample(graph, scenario, params, tick, rng_residuals)?;
    for map in maps.iter_mut() {
        if graph.is_anchor(map.owner) {
            continue;
        }
        let grad = local_gradient(map.owner, map, graph, &residuals, scenario.positions())?;
        *map = local_step(map, &grad, gamma);
    }
    let &(i, j) = graph
        .gossip_edges()
        .choose(rng_gossip)
        .expect("non-empty gossip edge list");
    let (mi, mj) = gossip_step(&maps[i], &maps[j], graph)?;
    maps[i] = mi;
    maps[j] = mj;
    Ok(())
}

/// Each non-anchor owner's own estimate, as rows of an N×p matrix
/// (anchor rows are filled with their true positions).
pub fn owner_positions(maps: &[LocalMap], graph: &LocalizationGraph, scenario: &Scenario) -> DMat {
    let p = scenario.dim();
    let mut out = DMat::zeros(graph.n(), p);
    for i in 0..graph.n() {
        let row = if graph.is_anchor(i) {
            scenario.positions().row(i).clone_owned()
        } else {
            maps[i].own_position().clone()
        };
        for k in 0..p {
            out[(i, k)] = row[k];
        }
    }
    out
}

/// RMSE of the non-anchor owners' positions against ground truth, in
/// absolute coordinates.
pub fn owner_rmse(maps: &[LocalMap], graph: &LocalizationGraph, scenario: &Scenario) -> f64 {
    let mut sum = 0.0;
    let mut count = 0usize;
    for (i, map) in maps.iter().enumerate() {
        if graph.is_anchor(i) {
            continue;
        }
        sum += (map.own_position() - scenario.positions().row(i)).norm_squared();
        count += 1;
    }
    (sum / count as f64).sqrt()
}
