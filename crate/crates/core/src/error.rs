use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A malformed row, unknown label, duplicate id or similar defect in an
    /// input file.
    #[error("{}:{line}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    /// Structural mismatch, e.g. a checkpoint whose shape table disagrees
    /// with its tensors.
    #[error("schema mismatch: {0}")]
    Schema(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("non-finite gradient in parameter `{0}`")]
    NonFiniteGradient(String),

    #[error("training diverged at epoch {epoch}, step {step}: non-finite loss")]
    Diverged { epoch: usize, step: usize },

    #[error("ablation variant `{variant}` failed: {source}")]
    Variant {
        variant: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }

    /// True for errors caused by bad configuration or malformed input schema,
    /// as opposed to failures while running.
    pub fn is_schema_error(&self) -> bool {
        match self {
            Error::Parse { .. } | Error::Config(_) | Error::Schema(_) | Error::Json(_) => true,
            Error::Variant { source, .. } => source.is_schema_error(),
            _ => false,
        }
    }
}
