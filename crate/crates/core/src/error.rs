//! Crate-wide error type.

use std::path::PathBuf;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A numeric or structural argument is outside its domain.
    #[error("invalid {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// A configuration key failed to parse or validate.
    #[error("config error at `{key}`: {reason}")]
    Config { key: String, reason: String },

    /// The node geometry does not span the requested embedding dimension:
    /// eigenvalue `index` (0-based, descending order) of the centered
    /// similarity matrix is not positive.
    #[error(
        "degenerate geometry: eigenvalue {index} of the centered similarity matrix is \
         {value:.6e}; the configuration does not span {dim} dimensions"
    )]
    DegenerateGeometry { index: usize, value: f64, dim: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// A message the protocol schedule promised was not supplied (or vice
    /// versa); indicates a driver bug, not message loss.
    #[error("protocol violation: {0}")]
    Protocol(String),

    /// Two positions coincide exactly where a log-distance term is required.
    #[error("singular geometry: {0}")]
    Singularity(String),

    #[error("localization graph is not connected: {0}")]
    Disconnected(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("i/o error on {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in {path} line {line}: {reason}")]
    Parse {
        path: PathBuf,
        line: usize,
        reason: String,
    },
}

impl Error {
    pub fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub fn config(key: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            reason: reason.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
