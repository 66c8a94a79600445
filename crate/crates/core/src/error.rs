use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Caller supplied arguments that violate an operation's contract.
    #[error("usage error: {0}")]
    Usage(String),

    /// An evaluator returned something unusable (non-finite values, timeouts,
    /// a dead child process).
    #[error("evaluation fault: {0}")]
    EvaluationFault(String),

    /// Malformed traffic on the `qdo-eval/1` channel.
    #[error("protocol error: {0}")]
    Protocol(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by bad input rather than a runtime fault.
    pub fn is_usage(&self) -> bool {
        matches!(self, Error::Usage(_) | Error::Json(_) | Error::Parse { .. })
    }
}
