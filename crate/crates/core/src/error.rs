use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the solvers, problem builders and I/O layer.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A numeric procedure broke down. `best_estimate` carries whatever the
    /// procedure had when it gave up (e.g. the last power-iteration value).
    #[error("numeric failure: {message}")]
    NumericFailure {
        message: String,
        best_estimate: Option<f64>,
    },

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error("value out of range: {0}")]
    Range(String),

    #[error("insufficient data: need at least {needed} usable points, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn numeric(msg: impl Into<String>) -> Self {
        Error::NumericFailure {
            message: msg.into(),
            best_estimate: None,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
