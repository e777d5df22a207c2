//! Error types shared across the library.
//!
//! The numerical routines distinguish four failure classes:
//!
//! * **Domain** — an argument is outside the mathematical domain of the
//!   operation (e.g. a kernel evaluated at `s <= 0`, a Hurst index outside
//!   `(0, 1)`). These are caller errors, never produced by round-off.
//! * **SeriesDivergence** — a hypergeometric series failed to converge within
//!   its term cap. With the built-in argument transformations this indicates
//!   parameters far outside the regime the kernels need.
//! * **Accuracy** — a quadrature's internal error estimate exceeded the
//!   requested tolerance. The estimate is carried so callers can decide
//!   whether to retry with a finer scheme.
//! * **StepUnderflow** — a finite-difference step fell below the resolvable
//!   floor for the requested point. The built-in kernels differentiate
//!   analytically and never raise this; it is reserved for user-supplied
//!   kernels whose derivative closures work by finite differences.

use thiserror::Error;

/// Unified error type for kernel evaluation, quadrature and the experiment
/// drivers.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    /// Argument outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A series did not converge within `max_terms` terms.
    #[error("series did not converge within {max_terms} terms (|last term| = {last_term:.3e})")]
    SeriesDivergence { max_terms: usize, last_term: f64 },

    /// A quadrature error estimate exceeded the requested tolerance.
    #[error("quadrature error estimate {estimate:.3e} exceeds tolerance {tolerance:.3e}")]
    Accuracy { estimate: f64, tolerance: f64 },

    /// A finite-difference step underflowed for the requested points.
    #[error("finite-difference step underflow: t - s = {gap:.3e} is below the 8h floor {floor:.3e}")]
    StepUnderflow { gap: f64, floor: f64 },

    /// Invalid configuration of an experiment or scheme.
    #[error("invalid configuration: {0}")]
    Config(String),
}

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Shorthand constructor for domain errors.
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// Shorthand constructor for configuration errors.
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
