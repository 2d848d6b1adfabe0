use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error("point cloud has no valid points")]
    EmptyCloud,

    #[error("invalid transform: {0}")]
    InvalidTransform(String),

    #[error("degenerate cloud: {0}")]
    DegenerateCloud(String),

    #[error("ambiguous reference frame (eigenvalues {eigenvalues:?}); pass force_frame to accept a tie-broken frame")]
    AmbiguousFrame { eigenvalues: [f64; 3] },

    #[error("invalid parameter: {0}")]
    InvalidParams(String),

    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("invalid histogram: {0}")]
    InvalidHistogram(String),

    #[error("unknown metric `{0}`")]
    UnknownMetric(String),

    #[error("unknown descriptor `{0}`")]
    UnknownDescriptor(String),

    #[error("missing {0} representation")]
    MissingRepresentation(String),

    #[error("perceptual memory is empty")]
    EmptyMemory,

    #[error("category `{category}` has {have} views, {need} required")]
    InsufficientViews {
        category: String,
        have: usize,
        need: usize,
    },

    #[error("undefined: {0}")]
    Undefined(String),

    #[error("schema error at row {row}: {reason}")]
    Schema { row: usize, reason: String },

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(line: usize, reason: impl Into<String>) -> Self {
        Error::Parse {
            line,
            reason: reason.into(),
        }
    }

    /// True for errors caused by geometrically unusable input rather than
    /// malformed data.
    pub fn is_degenerate_input(&self) -> bool {
        matches!(
            self,
            Error::EmptyCloud | Error::DegenerateCloud(_) | Error::AmbiguousFrame { .. }
        )
    }
}
