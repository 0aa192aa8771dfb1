use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("missing required column `{column}` (logical field `{field}`)")]
    MissingColumn { field: &'static str, column: String },

    #[error("invalid record format: {0}")]
    Format(String),

    #[error("baskets out of order: basket `{later}` (t={later_ts}) precedes `{earlier}` (t={earlier_ts})")]
    Unsorted {
        earlier: String,
        earlier_ts: f64,
        later: String,
        later_ts: f64,
    },

    #[error("index is empty: support is undefined")]
    EmptyIndex,

    #[error("lift undefined for ({0}, {1}): zero marginal support")]
    UndefinedLift(String, String),

    #[error("itemset of size {0} is not supported (only 1 or 2)")]
    ItemsetSize(usize),

    #[error("noise table for {0} units is empty")]
    EmptyNoise(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("catalog has {catalog} products but a query needs {needed}")]
    CatalogTooSmall { catalog: usize, needed: usize },

    #[error("query window {index} out of range ({windows} windows)")]
    QueryWindowOutOfRange { index: usize, windows: usize },

    #[error("not enough data: {0}")]
    InsufficientData(String),

    #[error("snapshot: {0}")]
    Snapshot(String),

    #[error("configuration errors:\n  {}", .0.join("\n  "))]
    Config(Vec<String>),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
