use std::path::PathBuf;

use crate::solvers::SolverResult;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A parameter lies outside the domain of the formula it feeds.
    #[error("parameter out of domain: {0}")]
    ParameterDomain(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// The convex-regime operators need `0 < a <= 1/sqrt(lam)`.
    #[error("convex regime requires a <= 1/sqrt(lam), got a = {a}, lam = {lam}")]
    RegimeViolation { a: f64, lam: f64 },

    /// The arccos argument of the stationary-value formula left [-1, 1]
    /// by more than the rounding allowance.
    #[error("arccos argument {arg} outside [-1, 1] (gamma = {gamma} is below the valid range)")]
    ArccosDomain { arg: f64, gamma: f64 },

    #[error("shape mismatch: expected {expected}, got {found}")]
    ShapeMismatch { expected: String, found: String },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("division by a vanishing quantity: {0}")]
    Degenerate(String),

    /// A solver stopped early; the iterate and traces up to the failure are kept.
    #[error("solver aborted at iteration {iteration}: {source}")]
    SolverAborted {
        iteration: usize,
        #[source]
        source: Box<Error>,
        partial: Box<SolverResult>,
    },

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn shape(expected: impl ToString, found: impl ToString) -> Self {
        Error::ShapeMismatch {
            expected: expected.to_string(),
            found: found.to_string(),
        }
    }
}
