use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A hyperparameter or experiment setting is missing, unknown or out of range.
    #[error("configuration error for `{key}`: {message}")]
    Config { key: String, message: String },

    /// Caller passed data that does not fit the receiving object
    /// (wrong dimension, non-finite value, action out of range).
    #[error("invalid input: {0}")]
    Input(String),

    /// Operation is illegal in the current state, e.g. stepping a finished episode.
    #[error("invalid state: {0}")]
    State(String),

    /// Malformed binary snapshot or CSV.
    #[error("format error at {location}: {message}")]
    Format { location: String, message: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
}

impl Error {
    pub(crate) fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }

    pub(crate) fn input(message: impl Into<String>) -> Self {
        Error::Input(message.into())
    }

    pub(crate) fn format_at_offset(offset: usize, message: impl Into<String>) -> Self {
        Error::Format {
            location: format!("byte offset {offset}"),
            message: message.into(),
        }
    }

    pub(crate) fn format_at_line(line: u64, message: impl Into<String>) -> Self {
        Error::Format {
            location: format!("line {line}"),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    /// Process exit code used by the `mfec` binary.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. } => 2,
            Error::Io { .. } => 3,
            _ => 1,
        }
    }
}
