use thiserror::Error;

/// Errors shared across the numerical modules.
#[derive(Debug, Error)]
pub enum CoreError {
    /// Structural problem in user-supplied data (dimensions, ranges, schema).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A mathematical invariant that the module guarantees was violated.
    #[error("invariant violation: {0}")]
    InvariantViolation(String),

    /// An iterative or limiting procedure failed to reach its tolerance.
    #[error("did not converge: {0}")]
    NonConvergence(String),

    /// Spectral gap assumption failed (eigenvalue too close to zero).
    #[error("spectral gap violation: {0}")]
    GapViolation(String),

    /// A complex parameter touched a branch cut or spectral set.
    #[error("branch cut contact: {0}")]
    BranchCut(String),

    /// Requested feature exists but is outside the supported parameter range.
    #[error("unsupported: {0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, CoreError>;
