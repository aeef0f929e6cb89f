use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Malformed tabular input. `line` is 1-based.
    #[error("{path}:{line}: {message}")]
    Table {
        path: PathBuf,
        line: usize,
        message: String,
    },

    /// Malformed est file; `line` and `column` are 1-based.
    #[error("est file line {line}, column {column}: {message}")]
    Est {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("cannot evaluate `{node}`: {message}")]
    Eval { node: String, message: String },

    #[error("configuration: {0}")]
    Config(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// The local-linear design matrix is (numerically) singular.
    #[error("design matrix is collinear ({0}); use the ridge adjustment instead")]
    Collinear(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("simulation failed: {0}")]
    Simulator(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn table(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Table {
            path: path.into(),
            line,
            message: message.into(),
        }
    }

    pub(crate) fn invalid(message: impl Into<String>) -> Self {
        Error::InvalidInput(message.into())
    }

    pub(crate) fn numerical(message: impl Into<String>) -> Self {
        Error::Numerical(message.into())
    }
}
