use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{stream} line {line}: {message}")]
    Parse {
        stream: &'static str,
        line: usize,
        message: String,
    },

    #[error("{stream} line {line}: missing field `{field}`")]
    MissingField {
        stream: &'static str,
        line: usize,
        field: &'static str,
    },

    #[error("{stream} line {line}: timestamp {current} does not follow {previous}")]
    Ordering {
        stream: &'static str,
        line: usize,
        previous: i64,
        current: i64,
    },

    #[error("annotations without a vitals sample within tolerance at t = {timestamps:?}")]
    UnmatchedAnnotations { timestamps: Vec<i64> },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("invalid network: {0}")]
    InvalidNetwork(String),

    #[error("invalid probability vector: {0}")]
    InvalidProbabilities(String),

    #[error("length mismatch: {left} labels vs {right} predictions")]
    LengthMismatch { left: usize, right: usize },

    #[error("AUC is undefined without both classes ({positives} positives, {negatives} negatives)")]
    UndefinedAuc { positives: usize, negatives: usize },

    #[error("degenerate training data: {0}")]
    DegenerateData(String),

    #[error("episode already terminated")]
    EpisodeTerminated,

    #[error("invalid value for `{field}`: {reason}")]
    InvalidConfig { field: String, reason: String },

    #[error("missing checkpoint: {}", .0.display())]
    MissingCheckpoint(PathBuf),

    #[error("{}: {source}", path.display())]
    File {
        path: PathBuf,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidConfig {
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// Attach the file the error came from.
    pub fn in_file(self, path: impl Into<PathBuf>) -> Self {
        Error::File {
            path: path.into(),
            source: Box::new(self),
        }
    }
}
