//! Error type shared by all modules.

use thiserror::Error;

/// Errors produced by configuration validation and the numerical core.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration or inconsistent problem setup.
    #[error("configuration error: {0}")]
    Config(String),

    /// A covariance (or precision) matrix could not be factorized.
    #[error("factorization failed: {0}")]
    Factorization(String),

    /// Vector or matrix dimensions do not line up.
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    /// The median-heuristic bandwidth degenerated to zero.
    #[error("degenerate kernel bandwidth: median pairwise distance is zero")]
    DegenerateBandwidth,

    /// A point was evaluated outside the support of a uniform prior.
    #[error("point outside uniform prior support at coordinate {coordinate}")]
    OutsideSupport { coordinate: usize },

    /// Rank selection was asked to operate on an empty spectrum.
    #[error("empty eigenvalue spectrum")]
    EmptySpectrum,

    /// Every gradient in the stack is zero, so no subspace can be built.
    #[error("gradient stack is identically zero; no informed subspace exists")]
    ZeroGradientStack,

    /// A particle state became NaN or infinite during transport.
    #[error("non-finite particle state at iteration {iteration}")]
    NonFinite { iteration: usize },

    /// File input could not be read or parsed.
    #[error("input error: {0}")]
    Input(String),
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
