//! Error type shared by all modules of the crate.

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied value violates a documented precondition.
    #[error("invalid input: {0}")]
    InvalidInput(String),
    /// Vector or matrix dimensions do not agree.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    /// An allocation would spend more budget than remains.
    #[error("budget violation: {0}")]
    BudgetViolation(String),
    /// A numerical routine failed to converge or produced non-finite values.
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
    /// The input is degenerate for the requested operation (e.g. a zero matrix).
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    /// An exact computation was refused because it would exceed the desk-scale guard.
    #[error("size limit exceeded: {0}")]
    SizeLimit(String),
    /// An internal invariant failed; indicates a bug upstream, not bad input.
    #[error("internal invariant violated: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, Error>;
