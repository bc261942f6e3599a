//! Error handling for the simulator.

use thiserror::Error;

/// Errors produced by simulator operations.
///
/// The variants map one-to-one onto the CLI exit codes, so library callers
/// and scripts can distinguish bad input from numerical trouble.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid input values: out-of-range parameters, mismatched dimensions.
    #[error("validation error: {0}")]
    Validation(String),
    /// A setup that cannot be simulated as requested: undersampled grids,
    /// an iris touching a neighbouring diffraction order, and the like.
    #[error("configuration error: {0}")]
    Configuration(String),
    /// Numerical failure, e.g. an unstable integrator step size.
    #[error("numerical error: {0}")]
    Numerical(String),
    /// Analysis failure on otherwise valid data: degenerate fits, profiles
    /// without half-maximum crossings.
    #[error("analysis error: {0}")]
    Analysis(String),
    /// A sample point outside the extent of a sampled grid.
    #[error("range error: {0}")]
    Range(String),
    /// Malformed interchange files (text matrices, PBM/PGM, manifests).
    #[error("format error: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub fn configuration(msg: impl Into<String>) -> Self {
        Error::Configuration(msg.into())
    }

    pub fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }

    pub fn analysis(msg: impl Into<String>) -> Self {
        Error::Analysis(msg.into())
    }

    pub fn range(msg: impl Into<String>) -> Self {
        Error::Range(msg.into())
    }

    pub fn format(msg: impl Into<String>) -> Self {
        Error::Format(msg.into())
    }
}
