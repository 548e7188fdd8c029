use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: malformed record: {message}")]
    Parse { line: usize, message: String },

    #[error("line {line}: field `{key}`: {message}")]
    Field {
        line: usize,
        key: String,
        message: String,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("singular normal matrix while solving {side} row {row}")]
    Singular { side: &'static str, row: usize },

    #[error("{kind} {key} not found")]
    Lookup { kind: &'static str, key: String },

    #[error("evaluation failed: {0}")]
    Eval(String),

    #[error("invalid model container: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn field(line: usize, key: &str, message: impl Into<String>) -> Self {
        Error::Field {
            line,
            key: key.to_string(),
            message: message.into(),
        }
    }
}
