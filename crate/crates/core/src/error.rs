use thiserror::Error;

use crate::optimizers::Trajectory;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite evaluation{}: {message}", coordinate.map(|c| format!(" at coordinate {c}")).unwrap_or_default())]
    Evaluation {
        coordinate: Option<usize>,
        message: String,
    },

    /// A non-finite iterate appeared. The partial trajectory up to the last
    /// finite iterate is kept for inspection.
    #[error("divergence at {}iteration {iteration}", stage.map(|s| format!("stage {s}, ")).unwrap_or_default())]
    Divergence {
        stage: Option<usize>,
        iteration: usize,
        partial: Box<Trajectory>,
    },

    #[error("inner solver did not converge after {iterations} iterations (residual {residual:e}, tolerance {tolerance:e})")]
    Convergence {
        iterations: usize,
        residual: f64,
        tolerance: f64,
    },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("config error at `{field}`: {message}")]
    Config { field: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }

    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
