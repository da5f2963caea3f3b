//! Error taxonomy shared across the library.

use thiserror::Error;

/// Errors surfaced by geometry validation, solvers, and the experiment
/// harness. Infeasibility is deliberately distinguishable from plain
/// validation failures so callers (and the CLI exit-code mapping) can react
/// to "this constraint set has no solution" differently from "bad input".
#[derive(Debug, Error)]
pub enum Error {
    /// Structurally invalid input: bad dimensions, nonpositive counts,
    /// out-of-range parameters.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Matrix dimensions that do not line up (e.g. precoder rows vs. active
    /// port count).
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// The radar (or secrecy) constraint cannot be met by any feasible
    /// precoder of the given power budget.
    #[error("infeasible constraint set: {0}")]
    Infeasible(String),

    /// An iterative numerical routine failed to converge.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Config-file syntax or semantic error with a 1-based line number.
    #[error("config error at line {line}: {msg}")]
    Config { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// True when the error represents constraint infeasibility rather than
    /// invalid input or a numerical breakdown.
    pub fn is_infeasible(&self) -> bool {
        matches!(self, Error::Infeasible(_))
    }
}
