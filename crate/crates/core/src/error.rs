use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("at least 2 rows are required, matrix has {rows}")]
    InsufficientRows { rows: usize },

    #[error("invalid distance spec: {0}")]
    Spec(String),

    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },

    #[error("degenerate distribution: {0}")]
    Degenerate(String),

    #[error("invalid growth regime: {0}")]
    Regime(String),

    #[error("unsupported mode: {0}")]
    Mode(String),

    #[error("format error at row {row}: {message}")]
    Format { row: usize, message: String },

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error("thread pool: {0}")]
    ThreadPool(String),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }

    /// Whether the error comes from rejected input rather than a failure
    /// while doing the work.
    pub fn is_validation(&self) -> bool {
        !matches!(
            self,
            Error::Io(_) | Error::Json(_) | Error::Csv(_) | Error::ThreadPool(_)
        )
    }
}
