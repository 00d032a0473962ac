use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed record {index}: {message}")]
    MalformedRecord { index: usize, message: String },

    #[error("duplicate id: {0}")]
    DuplicateId(String),

    #[error("label file row {row}: {message}")]
    Annotation { row: usize, message: String },

    #[error("vector file line {line}: {message}")]
    VectorFormat { line: usize, message: String },

    #[error("catalog line {line}: {message}")]
    Catalog { line: usize, message: String },

    #[error("factor {0}: no phrase token is in vocabulary")]
    FactorOutOfVocabulary(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("token-vector file line {line}: {message}")]
    TokenVectorFormat { line: usize, message: String },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("training: {0}")]
    Training(String),

    #[error("missing artifact: {0}")]
    MissingArtifact(String),

    #[error("stale artifact: {stage} ({reason})")]
    StaleArtifact { stage: String, reason: String },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
