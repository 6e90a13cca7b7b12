use std::io;

use thiserror::Error;

/// Everything that can go wrong inside the library.
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed input data. `line` is 1-based when known.
    #[error("parse error{}: {message}", line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    Parse { line: Option<u64>, message: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    /// More work was requested than the input can supply.
    #[error("capacity error: requested {requested}, only {available} available")]
    Capacity { requested: usize, available: usize },

    #[error("consistency error: {0}")]
    Consistency(String),

    #[error("shape error: {0}")]
    Shape(String),

    #[error("encoding error: {0}")]
    Encoding(String),

    #[error("statistics error: {0}")]
    Statistics(String),

    #[error("training error: {0}")]
    Training(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn parse(line: Option<u64>, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }
}

impl From<csv::Error> for Error {
    fn from(err: csv::Error) -> Self {
        let line = err.position().map(|p| p.line());
        match err.into_kind() {
            csv::ErrorKind::Io(e) => Error::Io(e),
            csv::ErrorKind::UnequalLengths {
                expected_len, len, ..
            } => Error::parse(line, format!("expected {expected_len} fields, found {len}")),
            other => Error::parse(line, format!("{other:?}")),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
