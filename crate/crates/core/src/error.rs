use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("line {line}: duplicate rating for user {user:?} and item {item:?}")]
    DuplicateRating {
        line: usize,
        user: String,
        item: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Stream(#[from] std::io::Error),

    #[error("unknown {kind} {id:?}")]
    UnknownEntity { kind: &'static str, id: String },

    #[error("entity {0:?} has no incident edges")]
    IsolatedEntity(String),

    #[error("non-finite parameter after update on pair {pair} of iteration {iteration} ({walk})")]
    Divergence {
        iteration: usize,
        walk: &'static str,
        pair: u64,
    },

    #[error("model format: {0}")]
    Format(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn arg(message: impl Into<String>) -> Self {
        Error::Argument(message.into())
    }

    /// Process exit status for this error class.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Argument(_) => 2,
            Error::Io { .. } | Error::Stream(_) => 3,
            Error::Parse { .. } | Error::DuplicateRating { .. } => 4,
            Error::Divergence { .. } => 5,
            Error::UnknownEntity { .. } | Error::IsolatedEntity(_) => 6,
            Error::Format(_) => 7,
        }
    }
}
