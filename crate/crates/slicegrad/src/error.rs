//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by samplers, estimators and the benchmark harness.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// An argument lies outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// An input is degenerate (zero norm, all-zero weights, ...).
    #[error("degenerate input: {0}")]
    Degenerate(String),
    /// A quantity underflowed past the smallest representable magnitude.
    #[error("numerical underflow: {0}")]
    Underflow(String),
    /// Two sequences that must have equal lengths do not.
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    /// An invalid combination of configuration values.
    #[error("configuration error: {0}")]
    Config(String),
    /// The operation requires a gradient oracle that was not supplied.
    #[error("missing gradient: {0}")]
    MissingGradient(String),
    /// A string did not parse as the expected value.
    #[error("parse error: {0}")]
    Parse(String),
    /// An iteration failed to converge within its budget.
    #[error("no convergence: {0}")]
    NoConvergence(String),
    /// A running computation exceeded its divergence guard.
    #[error("diverged: {0}")]
    Diverged(String),
}

pub type Result<T> = std::result::Result<T, Error>;
