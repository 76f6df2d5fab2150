use thiserror::Error;

/// Errors produced by the solvers, bounds and quantizers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("symbol {symbol} outside alphabet of size {size}")]
    SymbolOutOfAlphabet { symbol: usize, size: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("distortion threshold {d} outside solvable range (0, {max}]")]
    OutOfRange { d: f64, max: f64 },

    #[error("{what} did not converge after {iterations} iterations")]
    NonConvergence { what: &'static str, iterations: usize },

    #[error("distortion measure has no scalar radius representation")]
    NoRadius,

    #[error("distortion matrix is not balanced")]
    Unbalanced,

    #[error("distortion matrix is not a difference measure on Z_m")]
    NotGroupStructured,

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("infeasible: {0}")]
    Infeasible(String),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { name, reason: reason.into() }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
