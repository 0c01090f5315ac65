//! Centralized online MDS: Oja's stochastic PCA iteration.
//!
//! One noisy, centered similarity estimate m_n arrives per tick and the N×p
//! eigenvector iterate follows
//!
//! ```text
//! U_n = Π_K[ U_{n-1} + γ_n (m_n U_{n-1} − U_{n-1} (U_{n-1}ᵀ m_n U_{n-1})) ]
//! λ_{n,k} = λ_{n-1,k} + γ_n (u_{n-1,k}ᵀ m_n u_{n-1,k} − λ_{n-1,k})
//! ```
//!
//! with Π_K the componentwise projection onto the hypercube [−α, α]^{N×p}
//! and γ_n = a/n^β. Positions are read out as Ẑ = (√λ₁u₁, …, √λ_p u_p).
//!
//! The module also carries the analysis-side quantities used as test
//! oracles: the mean field h(U) = MU − U(UᵀMU) and the Lyapunov function
//! V(U) = e^{‖U‖²}/tr(UᵀMU), whose gradient satisfies ⟨∇V, h⟩ ≤ 0.

use crate::error::{Error, Result};
use crate::{DMat, DVec};
use rand::Rng;

/// Decaying step size γ_n = a / n^beta.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepSchedule {
    pub a: f64,
    pub beta: f64,
}

impl StepSchedule {
    /// a must be positive; beta must lie in [0.5, 1]. beta = 0.5 is accepted
    /// (it matches the common experimental choice a/√n) but leaves the
    /// square-summability condition unmet — check [`Self::square_summable`]
    /// and warn the user.
    pub fn new(a: f64, beta: f64) -> Result<Self> {
        if a <= 0.0 || !a.is_finite() {
            return Err(Error::invalid("schedule.a", format!("must be finite and > 0, got {a}")));
        }
        if !(0.5..=1.0).contains(&beta) {
            return Err(Error::invalid(
                "schedule.beta",
                format!("must be in [0.5, 1] (Σγ = ∞ requires beta ≤ 1; Σγ² < ∞ wants beta > 0.5), got {beta}"),
            ));
        }
        Ok(StepSchedule { a, beta })
    }

    /// Step at tick n (1-based).
    pub fn gamma(&self, n: u64) -> f64 {
        debug_assert!(n >= 1, "ticks are 1-based");
        self.a / (n as f64).powf(self.beta)
    }

    /// False exactly for beta = 0.5, where Σγ² diverges and convergence is
    /// outside the guaranteed regime.
    pub fn square_summable(&self) -> bool {
        self.beta > 0.5
    }
}

/// Hypercube K = [−α, α]^{N×p} onto which iterates are reprojected.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectionBox {
    pub alpha: f64,
}

impl ProjectionBox {
    /// α must exceed 1 so that unit-norm columns are interior points.
    pub fn new(alpha: f64) -> Result<Self> {
        if alpha <= 1.0 || !alpha.is_finite() {
            return Err(Error::invalid("box.alpha", format!("must be finite and > 1, got {alpha}")));
        }
        Ok(ProjectionBox { alpha })
    }

    #[inline]
    pub fn clamp(&self, x: f64) -> f64 {
        x.clamp(-self.alpha, self.alpha)
    }

    pub fn clamp_in_place(&self, u: &mut DMat) {
        for v in u.iter_mut() {
            *v = v.clamp(-self.alpha, self.alpha);
        }
    }
}

/// Componentwise Euclidean projection onto the box (idempotent).
pub fn project_box(u: &DMat, b: &ProjectionBox) -> DMat {
    DMat::from_fn(u.nrows(), u.ncols(), |i, j| b.clamp(u[(i, j)]))
}

/// State of the centralized iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct OjaState {
    /// Current eigenvector estimate U_n (N×p); every entry in [−α, α].
    pub u: DMat,
    /// Eigenvalue estimates λ_{n,k}.
    pub lambda: DVec,
    /// Tick counter n.
    pub iter: u64,
}

impl OjaState {
    pub fn new(u: DMat, lambda: DVec) -> Result<Self> {
        if u.ncols() != lambda.len() {
            return Err(Error::DimensionMismatch(format!(
                "u has {} columns but lambda has {} entries",
                u.ncols(),
                lambda.len()
            )));
        }
        Ok(OjaState { u, lambda, iter: 0 })
    }

    /// Standard initialization: U entries uniform on [−1, 1], λ = 0.
    pub fn init_random<R: Rng>(n: usize, p: usize, rng: &mut R) -> Self {
        let u = DMat::from_fn(n, p, |_, _| rng.random::<f64>() * 2.0 - 1.0);
        OjaState { u, lambda: DVec::zeros(p), iter: 0 }
    }
}

/// One U-update: U ← Π_K[U + γ(m_n U − U(Uᵀ m_n U))], tick counter
/// incremented. The eigenvalue recursion is separate ([`eigenvalue_step`])
/// so both can read the same pre-update U.
pub fn oja_step(state: &OjaState, m_n: &DMat, gamma: f64, b: &ProjectionBox) -> OjaState {
    let y = m_n * &state.u; // N×p
    let q = state.u.transpose() * &y; // p×p = Uᵀ m U
    let mut u = &state.u + gamma * (&y - &state.u * &q);
    b.clamp_in_place(&mut u);
    OjaState {
        u,
        lambda: state.lambda.clone(),
        iter: state.iter + 1,
    }
}

/// One λ-update: λ_k ← λ_k + γ(u_kᵀ m_n u_k − λ_k), reading the pre-update U.
pub fn eigenvalue_step(state: &OjaState, m_n: &DMat, gamma: f64) -> DVec {
    let p = state.u.ncols();
    let mut out = DVec::zeros(p);
    for k in 0..p {
        let u_k = state.u.column(k);
        let quad = (m_n * u_k).dot(&u_k);
        out[k] = state.lambda[k] + gamma * (quad - state.lambda[k]);
    }
    out
}

/// Apply both recursions of one tick (λ first, both reading U_{n−1}).
pub fn oja_tick(state: &mut OjaState, m_n: &DMat, gamma: f64, b: &ProjectionBox) {
    let lambda = eigenvalue_step(state, m_n, gamma);
    let next = oja_step(state, m_n, gamma, b);
    *state = next;
    state.lambda = lambda;
}

/// Position readout Ẑ = (√max(λ,0)·u); columns sorted by λ descending at
/// readout only (the iteration itself never reorders columns).
pub fn assemble_positions(state: &OjaState) -> DMat {
    let (n, p) = state.u.shape();
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| state.lambda[b].partial_cmp(&state.lambda[a]).unwrap());
    let mut out = DMat::zeros(n, p);
    for (k, &src) in order.iter().enumerate() {
        let scale = state.lambda[src].max(0.0).sqrt();
        for i in 0..n {
            out[(i, k)] = state.u[(i, src)] * scale;
        }
    }
    out
}

/// Mean field of the iteration: h(U) = MU − U(UᵀMU).
pub fn mean_field(u: &DMat, m: &DMat) -> DMat {
    let y = m * u;
    let q = u.transpose() * &y;
    y - u * q
}

/// Lyapunov function of the analysis: V(U) = e^{‖U‖²} / tr(UᵀMU).
/// Only meaningful while the quadratic form is positive.
pub fn lyapunov(u: &DMat, m: &DMat) -> Result<f64> {
    let q = u.transpose() * (m * u);
    let trace = q.trace();
    if trace <= 0.0 {
        return Err(Error::invalid(
            "lyapunov",
            format!("trace(UᵀMU) = {trace} must be positive"),
        ));
    }
    Ok((u.norm_squared()).exp() / trace)
}
