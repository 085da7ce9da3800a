//! Crate-wide error type.
//!
//! Two failure families matter to callers: content that is invalid
//! ([`Error::Validation`], [`Error::Parse`]) and I/O that failed
//! ([`Error::Io`]). The CLI maps the former to exit code 1 and the
//! latter to exit code 2.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid input data or configuration (degenerate box, bad shape,
    /// out-of-range score, inconsistent layer dimensions, ...).
    #[error("{0}")]
    Validation(String),

    /// Malformed content in a file, with the 1-based line it was found on.
    #[error("{path}: {msg} at line {line}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    /// An underlying I/O operation failed.
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub fn parse(path: impl Into<String>, line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            msg: msg.into(),
        }
    }

    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }

    /// Process exit code contract: 0 success, 1 validation, 2 I/O.
    pub fn exit_code(&self) -> u8 {
        match self {
            Error::Io { .. } => 2,
            _ => 1,
        }
    }
}
