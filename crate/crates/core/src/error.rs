use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CalibraError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("non-finite value {value} at {location}")]
    NonFinite { value: f64, location: String },

    #[error("value {value} at row {row}, column {col} lies outside the cosine range [-1, 1]")]
    OutOfRange { value: f64, row: usize, col: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("unsatisfiable scenario: {0}")]
    Unsatisfiable(String),

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

pub type Result<T, E = CalibraError> = std::result::Result<T, E>;

impl CalibraError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Self::InvalidInput(msg.into())
    }

    pub(crate) fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Self::Format {
            path: path.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }
}
