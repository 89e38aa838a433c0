use thiserror::Error;

use crate::parallel::TaskId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// An objective evaluation failed. `task` is absent when the failing call
    /// was not part of a planned batch.
    #[error("evaluation failed{}: {message}", task.map(|t| format!(" at {t}")).unwrap_or_default())]
    Evaluation { task: Option<TaskId>, message: String },

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("incomplete evaluation: {missing} result(s) missing, first is {first}")]
    IncompleteEvaluation { missing: usize, first: TaskId },

    #[error("contract violation: {0}")]
    ContractViolation(String),

    #[error("protocol error: {0}")]
    Protocol(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
