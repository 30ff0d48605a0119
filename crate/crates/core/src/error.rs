use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum VceError {
    #[error("invalid topology: {0}")]
    InvalidTopology(String),

    #[error("invalid request: {0}")]
    InvalidRequest(String),

    #[error("invalid cost vector: {0}")]
    InvalidCosts(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("instance exceeds enumeration limits: {0}")]
    LimitExceeded(String),

    #[error("no empirical cost entry for triple ({0}, {1}, {2})")]
    MissingCostEntry(u32, u32, u32),

    #[error("series length mismatch: expected {expected}, got {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("parse error at {context}: {message}")]
    Parse { context: String, message: String },

    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl VceError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        VceError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(context: impl Into<String>, message: impl Into<String>) -> Self {
        VceError::Parse {
            context: context.into(),
            message: message.into(),
        }
    }
}

pub type Result<T, E = VceError> = std::result::Result<T, E>;
