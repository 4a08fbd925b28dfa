use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: line {line}: {message}")]
    Parse { path: String, line: usize, message: String },

    #[error("dataset is empty: {0}")]
    EmptyDataset(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("cannot stratify: class {label} has {count} sample(s), need at least 2")]
    CannotStratify { label: u8, count: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("invalid probability distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("AUC is undefined when only one class is present")]
    UndefinedAuc,

    #[error("zero pooled variance with unequal means")]
    ZeroVariance,

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
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

    /// Short machine-readable category, used for structured CLI errors.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Parse { .. } => "parse",
            Error::EmptyDataset(_) => "empty_dataset",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::CannotStratify { .. } => "cannot_stratify",
            Error::Config(_) => "config",
            Error::InvalidDistribution(_) => "invalid_distribution",
            Error::InvalidInput(_) => "invalid_input",
            Error::UndefinedAuc => "undefined_auc",
            Error::ZeroVariance => "zero_variance",
            Error::Io { .. } => "io",
            Error::Json(_) => "json",
        }
    }
}
