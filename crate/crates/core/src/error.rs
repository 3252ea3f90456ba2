use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the decoding toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("failed to load {}: {source}", path.display())]
    Load {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{file}:{line}: {message}")]
    Parse {
        file: String,
        line: u64,
        message: String,
    },

    #[error("invalid dataset: {0}")]
    Validation(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("unsupported input: {0}")]
    UnsupportedInput(String),

    #[error("shape mismatch: expected {expected}, got {actual}")]
    Shape { expected: String, actual: String },

    #[error("fit failed: {0}")]
    Fit(String),

    #[error("degenerate labels: {0}")]
    DegenerateLabels(String),

    #[error("degenerate target: {0}")]
    DegenerateTarget(String),

    #[error("R² undefined: target dimension {dim} is constant")]
    UndefinedMetric { dim: usize },

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn shape_err(expected: impl ToString, actual: impl ToString) -> Error {
    Error::Shape {
        expected: expected.to_string(),
        actual: actual.to_string(),
    }
}
