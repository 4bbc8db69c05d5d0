//! Error type shared by every module in the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Configuration rejected before any computation ran.
    #[error("invalid config: {0}")]
    Config(String),

    /// Runtime contract violated (dimension mismatch, bad call order).
    #[error("contract violation: {0}")]
    Contract(String),

    /// The requested quantity is undefined for the given inputs.
    #[error("not applicable: {0}")]
    NotApplicable(String),

    /// Checkpoint bytes are malformed or belong to an incompatible version.
    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization: {0}")]
    Serde(String),
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub fn not_applicable(msg: impl Into<String>) -> Self {
        Error::NotApplicable(msg.into())
    }

    pub fn checkpoint(msg: impl Into<String>) -> Self {
        Error::Checkpoint(msg.into())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Serde(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
