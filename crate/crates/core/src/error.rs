//! Error types for the whole crate.
//!
//! Every fallible public operation returns [`Result`]. Variants carry enough
//! context to diagnose a failure from the message alone; callers that need to
//! branch can match on the variant.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors produced by coefficient validation, solvers, and the experiment
/// harness.
#[derive(Debug, Error)]
pub enum Error {
    /// A coefficient field or problem description failed structural
    /// validation (dimensions, symmetry completion, ellipticity, ...).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// An iterative solver stopped without reaching its tolerance.
    #[error("solver did not converge: {context} (residual {residual:.3e} after {iterations} iterations, tol {tol:.3e})")]
    NoConvergence {
        /// What was being solved.
        context: String,
        /// Relative residual at the final iterate.
        residual: f64,
        /// Iterations performed.
        iterations: usize,
        /// Requested relative tolerance.
        tol: f64,
    },

    /// A quantity that must vanish (up to a stated tolerance) did not.
    #[error("consistency check failed: {context} (|value| {value:.3e} exceeds tol {tol:.3e})")]
    ConsistencyFailure {
        /// Which invariant was checked.
        context: String,
        /// Magnitude observed.
        value: f64,
        /// Allowed magnitude.
        tol: f64,
    },

    /// A direct linear solve met a (numerically) singular matrix.
    #[error("singular linear system: {0}")]
    SingularSystem(String),

    /// Configuration file / expression / CLI input could not be parsed.
    #[error("parse error: {0}")]
    Parse(String),

    /// Underlying I/O failure (reading configs, writing reports).
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// JSON (de)serialization failure.
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Convenience constructor for [`Error::InvalidInput`].
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    /// Convenience constructor for [`Error::Parse`].
    pub fn parse(msg: impl Into<String>) -> Self {
        Error::Parse(msg.into())
    }
}
