use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),

    /// Too many malformed input lines, or an unreadable cache body.
    #[error("corpus format error: {0}")]
    Format(String),

    #[error("cache schema version mismatch: expected {expected}, found {found}")]
    Version { expected: String, found: String },

    #[error("unknown user id `{0}`")]
    UnknownUser(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("corpus too small: {0}")]
    TooSmall(String),

    #[error("evaluation infeasible: {0}")]
    Infeasible(String),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn parameter(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }
}
