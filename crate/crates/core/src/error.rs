use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{}:{line}: {msg}", path.display())]
    Format { path: PathBuf, line: usize, msg: String },

    #[error("mesh validation failed: {0}")]
    Validation(String),

    #[error("degenerate triangle {triangle} (area {area:e})")]
    Geometry { triangle: usize, area: f64 },

    #[error("non-finite function value at vertex {vertex} ({x}, {y})")]
    Evaluation { vertex: usize, x: f64, y: f64 },

    #[error("field size mismatch: expected {expected}, got {got}")]
    SizeMismatch { expected: usize, got: usize },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("linear solver did not converge in {iterations} iterations (relative residual {residual:e})")]
    LinearConvergence { iterations: usize, residual: f64 },

    #[error("time step {step}: no convergence after {iterations} iterations ({detail})")]
    NonConvergence { step: usize, iterations: usize, detail: String },

    #[error("outside the regime of the analytic solution: {0}")]
    OutOfRegime(String),

    #[error("relative error undefined: exact solution has zero norm")]
    UndefinedError,

    #[error("config key `{key}`: {msg}")]
    Config { key: String, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn config(key: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Config { key: key.into(), msg: msg.into() }
    }

    /// Attach a time-step index to a failure raised inside a step.
    pub(crate) fn at_step(self, step: usize) -> Self {
        match self {
            Error::NonConvergence { iterations, detail, .. } => Error::NonConvergence { step, iterations, detail },
            Error::LinearConvergence { iterations, residual } => Error::NonConvergence {
                step,
                iterations,
                detail: format!("linear solve stalled at relative residual {residual:e}"),
            },
            other => other,
        }
    }
}
