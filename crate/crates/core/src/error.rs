//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("journal {journal_id}: year {year} not present in history")]
    MissingYear { journal_id: String, year: i32 },

    #[error("journal {journal_id}: CiteScore undefined for {year}: no publications in the four-year window")]
    UndefinedCiteScore { journal_id: String, year: i32 },

    #[error("insufficient history: need at least {needed} values, got {actual}")]
    InsufficientHistory { needed: usize, actual: usize },

    #[error("journal {journal_id}: feature {feature} unavailable for year {year}")]
    MissingFeature {
        journal_id: String,
        feature: String,
        year: i32,
    },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("empty dataset")]
    EmptyDataset,

    #[error("duplicate journal id {0}")]
    DuplicateJournal(String),

    #[error("shape mismatch: expected {expected}, got {actual}")]
    ShapeMismatch { expected: String, actual: String },

    #[error("training diverged at epoch {epoch}: loss is not finite")]
    Divergence { epoch: usize },

    #[error("parse error at line {line}: {source}")]
    Parse {
        line: usize,
        #[source]
        source: serde_json::Error,
    },

    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error("unsupported model file version {0}")]
    UnsupportedVersion(u32),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}
