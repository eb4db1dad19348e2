use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument violates the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Invalid experiment or command configuration, detected before any work is done.
    #[error("config error: {0}")]
    Config(String),

    /// A malformed record in an input file.
    #[error("{path}: line {line}, column `{column}`: {message}")]
    Data {
        path: PathBuf,
        line: u64,
        column: String,
        message: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("serialisation error: {0}")]
    Serialize(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code: 2 config/validation, 3 data format, 4 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Domain(_) | Error::Config(_) => 2,
            Error::Data { .. } | Error::Serialize(_) => 3,
            Error::Io { .. } => 4,
        }
    }
}
