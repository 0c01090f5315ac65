//! Self-localization of wireless sensor networks from pairwise RSSI.
//!
//! The crate implements the full stack needed to localize N radio nodes from
//! noisy received-signal-strength readings:
//!
//! * [`channel`] — log-normal shadowing RSSI model, the unbiased
//!   squared-distance estimator, and the sparse Bernoulli observation process.
//! * [`mds`] — classical (batch) multidimensional scaling: similarity
//!   matrices, double centering, eigendecomposition, Procrustes alignment and
//!   RMSE evaluation.
//! * [`oja`] — centralized online PCA (Oja's algorithm with box
//!   reprojection) driven by one sparse observation per tick.
//! * [`domds`] — the distributed online MDS protocol: every node owns one
//!   row of the eigenvector iterate and refreshes it from local measurements
//!   plus two randomly-gossiped broadcasts per tick.
//! * [`domle`] — maximum-likelihood refinement: local log-distance
//!   least-squares descent with pairwise gossip averaging and anchor support.
//! * [`harness`] — deterministic, seedable experiment driver: scenario
//!   generation, Monte Carlo replicas, checkpointed RMSE trajectories and CSV
//!   reporting.
//!
//! All randomness flows through [`stream`], which derives an independent
//! ChaCha8 stream per (replica, tick, purpose) from a single master seed, so
//! every experiment is bit-reproducible.

pub mod channel;
pub mod domds;
pub mod domle;
pub mod error;
pub mod harness;
pub mod mds;
pub mod oja;
pub mod stream;

pub use error::{Error, Result};
pub use mds::Scenario;

/// Dense double-precision matrix used throughout the crate.
pub type DMat = nalgebra::DMatrix<f64>;
/// Dense column vector.
pub type DVec = nalgebra::DVector<f64>;
/// Dense row vector (one node's slice of an N×p iterate).
pub type DRowVec = nalgebra::RowDVector<f64>;
