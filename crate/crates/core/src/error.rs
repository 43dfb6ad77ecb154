use thiserror::Error;

/// Errors surfaced by the statistical kernels.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix is not positive definite (pivot {pivot} = {value})")]
    NotPositiveDefinite { pivot: usize, value: f64 },

    #[error("matrix is numerically singular: {0}")]
    Conditioning(String),

    #[error("solver failed: {0}")]
    Solver(String),

    #[error("numerical routine did not converge: {0}")]
    NonConvergence(String),

    #[error("internal identity check failed: {0}")]
    IdentityCheck(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
