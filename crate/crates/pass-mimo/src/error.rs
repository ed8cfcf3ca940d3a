//! Crate-wide error type.
//!
//! Every fallible operation in this crate returns [`PassError`] so callers can
//! match on the failure class (bad configuration, infeasible geometry, linear
//! algebra breakdown, I/O) without string inspection.

use crate::trace::ConvergenceTrace;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, PassError>;

/// Failure classes surfaced by the library.
#[derive(Debug, thiserror::Error)]
pub enum PassError {
    /// A scenario or experiment parameter is out of range or inconsistent.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// A pinching-element layout violates the waveguide bounds or the
    /// minimum-spacing constraint.
    #[error("infeasible element locations: {0}")]
    InfeasibleLocations(String),

    /// An operation that divides by the precoder energy received an all-zero
    /// precoder.
    #[error("degenerate precoder: {0}")]
    DegeneratePrecoder(String),

    /// A Gram matrix that must be inverted is rank deficient
    /// (or far too ill-conditioned to trust).
    #[error("rank-deficient channel: {0}")]
    RankDeficient(String),

    /// A linear system that should be positive definite failed to invert.
    #[error("singular linear system: {0}")]
    SingularSystem(String),

    /// An iterative solver produced a non-finite objective. The trace of
    /// iterations completed before the breakdown is attached for diagnosis.
    #[error("numerical failure: {reason}")]
    NumericalFailure {
        reason: String,
        trace: Box<ConvergenceTrace>,
    },

    /// Command-line / config-file parsing failure.
    #[error("argument error: {0}")]
    Argument(String),

    /// Filesystem failure while writing experiment outputs.
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    /// CSV serialization failure.
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}
