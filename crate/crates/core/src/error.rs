use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed MGF input. `block` is the 1-based ordinal of the BEGIN IONS block.
    #[error("MGF block {block} (line {line}): {message}")]
    Mgf {
        block: usize,
        line: usize,
        message: String,
    },

    #[error("labels row {row}: {message}")]
    Labels { row: usize, message: String },

    #[error("splits: {0}")]
    Splits(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{op}: {message}")]
    Shape { op: &'static str, message: String },

    #[error("encoding: {0}")]
    Encode(String),

    #[error("autodiff: {0}")]
    Autodiff(String),

    #[error("tensor format: {0}")]
    Format(String),

    #[error("metrics: {0}")]
    Metrics(String),

    #[error("dataset: {0}")]
    Dataset(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn shape(op: &'static str, message: impl Into<String>) -> Self {
        Error::Shape {
            op,
            message: message.into(),
        }
    }

    /// True for errors caused by bad user input rather than runtime failures.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Mgf { .. }
                | Error::Labels { .. }
                | Error::Splits(_)
                | Error::Config(_)
                | Error::Dataset(_)
        )
    }
}
