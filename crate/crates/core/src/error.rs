use std::io;

/// Errors produced by dataset ingestion, model training, and attack runs.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("io error: {0}")]
    Io(#[from] io::Error),

    /// Bad magic number or malformed file structure.
    #[error("format error: {0}")]
    Format(String),

    /// File shorter than its header claims.
    #[error("length error: {0}")]
    Length(String),

    /// Two inputs that must agree do not (e.g. image/label counts).
    #[error("consistency error: {0}")]
    Consistency(String),

    /// Invalid configuration value.
    #[error("config error: {0}")]
    Config(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },

    #[error("empty dataset")]
    EmptyDataset,
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn format(msg: impl Into<String>) -> Self {
        Error::Format(msg.into())
    }

    pub(crate) fn length(msg: impl Into<String>) -> Self {
        Error::Length(msg.into())
    }

    pub(crate) fn consistency(msg: impl Into<String>) -> Self {
        Error::Consistency(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
