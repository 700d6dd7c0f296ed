//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by the disaggregation library.
#[derive(Error, Debug, Clone, PartialEq)]
pub enum Error {
    /// Frequency, date-range, or length mismatch between inputs.
    #[error("alignment error: {0}")]
    Alignment(String),

    /// Malformed or inconsistent column structure.
    #[error("schema error: {0}")]
    Schema(String),

    /// Input values outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A design or covariance matrix is rank deficient.
    #[error("rank deficient: {0}")]
    RankDeficient(String),

    /// An iterative solver exhausted its iteration budget.
    #[error("failed to converge: {0}")]
    NonConvergence(String),

    /// A constraint system cannot be built or satisfied.
    #[error("infeasible constraint system: {0}")]
    Infeasible(String),

    /// The requested mode is not supported for the given input size.
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// Invalid configuration or argument value.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;
