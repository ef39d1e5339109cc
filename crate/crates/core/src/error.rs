use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the detection pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("row {row}: expected {expected} fields, found {found}")]
    RaggedRow { row: usize, expected: usize, found: usize },

    #[error("empty input: {0}")]
    Empty(String),

    #[error("invalid schema: {0}")]
    Schema(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("constraint parse error at column {position}: {message}")]
    ConstraintParse { position: usize, message: String },

    #[error("invalid label file: {0}")]
    Labels(String),

    #[error("dimension mismatch: expected {expected}, got {found}")]
    Dimension { expected: usize, found: usize },

    #[error("training data has a single class ({0}); enable augmentation or add labeled errors")]
    SingleClass(&'static str),

    #[error("transformation `{lhs}` does not occur in `{value}`")]
    NotApplicable { lhs: String, value: String },

    #[error("layout mismatch: checkpoint {expected}, dataset {found}")]
    LayoutMismatch { expected: String, found: String },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("unknown suite `{0}`; expected one of: end2end, ablation, aug-vs-super, balance-sweep, weak-precision")]
    UnknownSuite(String),

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by bad user input or configuration rather
    /// than a failure while running.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            Error::Config(_)
                | Error::UnknownSuite(_)
                | Error::ConstraintParse { .. }
                | Error::Labels(_)
                | Error::Schema(_)
                | Error::LayoutMismatch { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
