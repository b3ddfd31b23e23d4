use std::io;

use thiserror::Error;

/// Errors raised while reading or validating trajectory and dataset files.
#[derive(Debug, Error)]
pub enum Error {
    #[error("io error: {0}")]
    Io(#[from] io::Error),

    #[error("line {line}: {message}")]
    Row { line: usize, message: String },

    #[error("vehicle {vehicle}: {message}")]
    Track { vehicle: u32, message: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn row(line: usize, message: impl Into<String>) -> Self {
        Error::Row {
            line,
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
