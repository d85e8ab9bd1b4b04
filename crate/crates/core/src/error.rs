use thiserror::Error;

use crate::solver::Solution;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid training data: {0}")]
    Data(String),

    #[error("numeric range exceeded: {0}")]
    NumericRange(String),

    #[error("resource limit: {0}")]
    ResourceLimit(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("internal consistency check failed: {0}")]
    Consistency(String),

    #[error("singular linear system (condition estimate {condition:.3e})")]
    Singular { condition: f64 },

    #[error("solver did not converge: {reason}")]
    NonConvergence { reason: String, best: Box<Solution> },

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
