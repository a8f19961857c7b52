//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    /// Malformed corpus, dataset, or model file contents.
    #[error("{0}")]
    Format(String),

    /// A parse failure tied to a specific line of an input file.
    #[error("line {line}: {message}")]
    Line { line: usize, message: String },

    /// Invalid configuration or parameters.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// Data-level failures: empty corpora, unknown symbols, degenerate inputs.
    #[error("{0}")]
    Data(String),
}

impl Error {
    pub(crate) fn format(msg: impl Into<String>) -> Self {
        Error::Format(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn data(msg: impl Into<String>) -> Self {
        Error::Data(msg.into())
    }

    pub(crate) fn line(line: usize, msg: impl Into<String>) -> Self {
        Error::Line {
            line,
            message: msg.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
