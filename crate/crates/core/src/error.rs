//! Error type shared across the crate.
//!
//! Variants map onto the CLI exit-code contract: configuration problems,
//! missing artifacts (checkpoints, tables), and runtime failures.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Bad or missing configuration (unknown key, unparsable value,
    /// missing config file, table that violates its invariants, ...).
    #[error("config error: {0}")]
    Config(String),

    /// A required artifact (checkpoint, accuracy table file) is absent.
    #[error("missing artifact: {0}")]
    MissingArtifact(String),

    /// Non-finite values or other numeric breakdown at runtime.
    #[error("numeric failure: {0}")]
    Numeric(String),

    /// Domain violation on an operation input (shape mismatch, negative
    /// power, empty trajectory, ...).
    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    pub fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }

    pub fn missing(msg: impl Into<String>) -> Self {
        Error::MissingArtifact(msg.into())
    }
}
