//! Log-normal shadowing RSSI model and the sparse observation process.
//!
//! Received power between distinct nodes i, j at distance d (meters):
//!
//! ```text
//! P = -PL(d) + eps,   PL(d) = PL0 + 10 eta log10(d / d0),   eps ~ N(0, sigma2)
//! ```
//!
//! with d0 fixed at 1 m. Averaging T fresh draws into Pbar and inverting the
//! path loss yields a log-normally distributed squared-distance estimate; the
//! multiplicative bias is removed by the constant
//!
//! ```text
//! C = 10^{sigma2 ln10 / (2 T (10 eta)^2)}
//! D = 10^{(-Pbar - PL0) / (5 eta)} / C^4
//! ```
//!
//! which satisfies E[D] = d^2 and Var[D] = d^4 (C^8 - 1). The Gaussian noise
//! law is what makes the log-normal correction exact.
//!
//! A network-wide measurement tick is a [`SparseObservation`]: every ordered
//! pair (i, j) is observed independently with probability q_ij, and observed
//! entries are reweighted by 1/q_ij so that the resulting matrix S_n is an
//! unbiased estimate of the exact squared-distance matrix. Forward and
//! reverse directions are independent draws; no symmetrization is applied.

use crate::error::{Error, Result};
use crate::mds::Scenario;
use crate::{DMat, DVec};
use rand::Rng;
use rand_distr::{Distribution, Normal};

/// Reference distance d0 of the path-loss model (meters). The estimator's
/// exponent algebra is only consistent at 1 m, so this is not configurable.
pub const REFERENCE_DISTANCE_M: f64 = 1.0;

const LN_10: f64 = std::f64::consts::LN_10;

/// Radio channel parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelParams {
    /// Path loss at the reference distance (dB).
    pub pl0: f64,
    /// Path-loss exponent (dimensionless, > 0).
    pub eta: f64,
    /// Shadowing noise variance (dB^2, >= 0).
    pub sigma2: f64,
    /// Number of RSSI samples averaged per estimate (>= 1).
    pub t_samples: u32,
}

impl ChannelParams {
    pub fn new(pl0: f64, eta: f64, sigma2: f64, t_samples: u32) -> Result<Self> {
        if eta <= 0.0 || !eta.is_finite() {
            return Err(Error::invalid("eta", format!("must be finite and > 0, got {eta}")));
        }
        if sigma2 < 0.0 || !sigma2.is_finite() {
            return Err(Error::invalid("sigma2", format!("must be finite and >= 0, got {sigma2}")));
        }
        if t_samples < 1 {
            return Err(Error::invalid("t_samples", "must be >= 1"));
        }
        if !pl0.is_finite() {
            return Err(Error::invalid("pl0", format!("must be finite, got {pl0}")));
        }
        Ok(ChannelParams { pl0, eta, sigma2, t_samples })
    }

    /// Convenience constructor for a noise-free channel (sigma2 = 0, T = 1).
    pub fn noiseless(pl0: f64, eta: f64) -> Self {
        ChannelParams { pl0, eta, sigma2: 0.0, t_samples: 1 }
    }
}

/// A single received-power draw between an ordered node pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RssiSample {
    /// Received signal strength (dB).
    pub value: f64,
    /// Measuring node.
    pub src: usize,
    /// Transmitting node.
    pub dst: usize,
}

/// Average path loss at distance `d` meters: PL0 + 10 eta log10(d).
pub fn path_loss(d: f64, params: &ChannelParams) -> Result<f64> {
    if d.is_nan() || d <= 0.0 {
        return Err(Error::invalid("distance", format!("must be > 0, got {d}")));
    }
    Ok(params.pl0 + 10.0 * params.eta * (d / REFERENCE_DISTANCE_M).log10())
}

/// One RSSI draw -PL(d) + eps between nodes `i` (receiver) and `j`.
pub fn sample_rssi<R: Rng>(
    i: usize,
    j: usize,
    d: f64,
    params: &ChannelParams,
    rng: &mut R,
) -> Result<RssiSample> {
    if i == j {
        return Err(Error::invalid("node pair", format!("src and dst must differ, got {i}")));
    }
    let pl = path_loss(d, params)?;
    let noise = Normal::new(0.0, params.sigma2.sqrt())
        .map_err(|e| Error::Numerical(format!("noise law: {e}")))?;
    Ok(RssiSample {
        value: -pl + noise.sample(rng),
        src: i,
        dst: j,
    })
}

/// Mean of `t_samples` independent RSSI draws at distance `d` (the Pbar fed
/// into [`estimate_sq_distance`]).
pub fn sample_mean_rssi<R: Rng>(d: f64, params: &ChannelParams, rng: &mut R) -> Result<f64> {
    let pl = path_loss(d, params)?;
    let noise = Normal::new(0.0, params.sigma2.sqrt())
        .map_err(|e| Error::Numerical(format!("noise law: {e}")))?;
    let mut acc = 0.0;
    for _ in 0..params.t_samples {
        acc += noise.sample(rng);
    }
    Ok(-pl + acc / params.t_samples as f64)
}

/// Bias-correction constant C = 10^{sigma2 ln10 / (2 T (10 eta)^2)}; C >= 1,
/// equal to 1 exactly when sigma2 = 0.
pub fn bias_constant(params: &ChannelParams) -> f64 {
    let exponent =
        params.sigma2 * LN_10 / (2.0 * params.t_samples as f64 * (10.0 * params.eta).powi(2));
    10f64.powf(exponent)
}

/// Unbiased squared-distance estimate from a T-averaged RSSI reading:
/// 10^{(-mean_rssi - PL0)/(5 eta)} / C^4. Always positive.
pub fn estimate_sq_distance(mean_rssi: f64, params: &ChannelParams) -> f64 {
    let c4 = bias_constant(params).powi(4);
    ((-mean_rssi - params.pl0) * LN_10 / (5.0 * params.eta)).exp() / c4
}

/// Per-pair observation probabilities q_ij; the diagonal is unused.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationModel {
    q: DMat,
}

impl ObservationModel {
    /// Same probability q for every ordered pair.
    pub fn uniform(n: usize, q: f64) -> Result<Self> {
        if !(q > 0.0 && q <= 1.0) {
            return Err(Error::invalid("q_obs", format!("must be in (0, 1], got {q}")));
        }
        Ok(ObservationModel { q: DMat::from_element(n, n, q) })
    }

    /// Full probability matrix; off-diagonal entries must lie in (0, 1].
    pub fn from_matrix(q: DMat) -> Result<Self> {
        if q.nrows() != q.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "observation matrix must be square, got {}x{}",
                q.nrows(),
                q.ncols()
            )));
        }
        for i in 0..q.nrows() {
            for j in 0..q.ncols() {
                if i != j && !(q[(i, j)] > 0.0 && q[(i, j)] <= 1.0) {
                    return Err(Error::invalid(
                        "q_obs",
                        format!("entry ({i},{j}) = {} outside (0, 1]", q[(i, j)]),
                    ));
                }
            }
        }
        Ok(ObservationModel { q })
    }

    pub fn n(&self) -> usize {
        self.q.nrows()
    }

    /// Observation probability for the ordered pair (i, j).
    pub fn q(&self, i: usize, j: usize) -> f64 {
        self.q[(i, j)]
    }

    /// Reweighting factor 1/q_ij applied to observed entries.
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        1.0 / self.q[(i, j)]
    }
}

/// One network-wide measurement tick.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseObservation {
    /// Reweighted squared-distance estimates (m^2); zero where unobserved.
    pub s: DMat,
    /// Bernoulli observation outcomes (1 = observed).
    pub mask: nalgebra::DMatrix<u8>,
    /// Row averages (1/N) sum_j s(i, j) (m^2).
    pub row_avg: DVec,
}

impl SparseObservation {
    /// All-zero observation of the right shape (fill with
    /// [`ObservationSampler::sample_into`]).
    pub fn empty(n: usize) -> Self {
        SparseObservation {
            s: DMat::zeros(n, n),
            mask: nalgebra::DMatrix::zeros(n, n),
            row_avg: DVec::zeros(n),
        }
    }
}

/// Precomputed per-scenario sampling context. Building it once and reusing it
/// across ticks keeps the per-tick cost at one uniform draw per pair plus T
/// Gaussians and one exp per observed pair.
pub struct ObservationSampler {
    n: usize,
    /// Exact squared distances d_ij^2.
    d2: DMat,
    /// Observation probabilities.
    q: DMat,
    /// 1 / q_ij.
    w: DMat,
    noise: Normal<f64>,
    t_samples: u32,
    /// -ln10 / (5 eta T): converts summed noise into the log-normal exponent.
    eps_scale: f64,
    /// 1 / C^4.
    inv_c4: f64,
}

impl ObservationSampler {
    pub fn new(scenario: &Scenario, obs: &ObservationModel, params: &ChannelParams) -> Result<Self> {
        let n = scenario.n();
        if n < 2 {
            return Err(Error::invalid("scenario", "needs at least 2 nodes"));
        }
        if obs.n() != n {
            return Err(Error::DimensionMismatch(format!(
                "observation model is {}x{} but scenario has {} nodes",
                obs.n(),
                obs.n(),
                n
            )));
        }
        let mut d2 = DMat::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    d2[(i, j)] = scenario.sq_distance(i, j);
                }
            }
        }
        let mut w = DMat::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    w[(i, j)] = obs.weight(i, j);
                }
            }
        }
        let noise = Normal::new(0.0, params.sigma2.sqrt())
            .map_err(|e| Error::Numerical(format!("noise law: {e}")))?;
        Ok(ObservationSampler {
            n,
            d2,
            q: obs.q.clone(),
            w,
            noise,
            t_samples: params.t_samples,
            eps_scale: -LN_10 / (5.0 * params.eta * params.t_samples as f64),
            inv_c4: bias_constant(params).powi(-4),
        })
    }

    /// Draw one tick into `out` (must have matching size).
    ///
    /// For an observed pair, s(i,j) = d_ij^2 exp(eps_bar * -ln10/(5 eta)) / C^4
    /// / q_ij, algebraically identical to running the Pbar pipeline but
    /// without re-deriving PL(d) per tick.
    pub fn sample_into<R: Rng>(&self, out: &mut SparseObservation, rng: &mut R) {
        let n = self.n;
        assert_eq!(out.s.nrows(), n, "observation buffer size mismatch");
        let nf = n as f64;
        for i in 0..n {
            let mut row_sum = 0.0;
            for j in 0..n {
                if i == j {
                    continue;
                }
                if rng.random::<f64>() < self.q[(i, j)] {
                    let mut eps_sum = 0.0;
                    for _ in 0..self.t_samples {
                        eps_sum += self.noise.sample(rng);
                    }
                    let est = self.d2[(i, j)] * (eps_sum * self.eps_scale).exp() * self.inv_c4;
                    let v = est * self.w[(i, j)];
                    out.s[(i, j)] = v;
                    out.mask[(i, j)] = 1;
                    row_sum += v;
                } else {
                    out.s[(i, j)] = 0.0;
                    out.mask[(i, j)] = 0;
                }
            }
            // Division (not multiplication by 1/N) so the stored value is
            // bit-identical to summing the row and dividing.
            out.row_avg[i] = row_sum / nf;
        }
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> SparseObservation {
        let mut out = SparseObservation::empty(self.n);
        self.sample_into(&mut out, rng);
        out
    }
}

/// One-shot convenience wrapper: build a sampler and draw a single tick.
pub fn sample_observation<R: Rng>(
    scenario: &Scenario,
    obs: &ObservationModel,
    params: &ChannelParams,
    rng: &mut R,
) -> Result<SparseObservation> {
    Ok(ObservationSampler::new(scenario, obs, params)?.sample(rng))
}
