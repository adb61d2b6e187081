use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("time {t} is outside the interval [{start}, {end}]")]
    OutOfRange { t: f64, start: f64, end: f64 },

    #[error("degenerate interpolation interval at t = {0} with differing end poses")]
    DegenerateInterval(f64),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(
        "line {line}: timestamp {timestamp} is not greater than the previous timestamp {previous}"
    )]
    Ordering {
        line: usize,
        timestamp: f64,
        previous: f64,
    },

    #[error("line {line}: invalid record: {message}")]
    InvalidRecord { line: usize, message: String },

    #[error("manifest: {0}")]
    Manifest(String),

    #[error("no estimate overlaps the ground-truth coverage ({dropped} estimates dropped)")]
    NoOverlap { dropped: usize },

    #[error("alignment needs at least 3 pairs, got {0}")]
    Underdetermined(usize),

    #[error("estimated positions have zero variance; scale is undetermined")]
    DegenerateScale,

    #[error("invalid time span [{t_min}, {t_max}]")]
    InvalidSpan { t_min: f64, t_max: f64 },

    #[error("need at least {needed} estimates, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("scene '{scene}' cannot be evaluated: {reason}")]
    SceneFailure { scene: String, reason: String },

    #[error("{}: {inner}", path.display())]
    File { path: PathBuf, inner: Box<Error> },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn in_file(self, path: impl Into<PathBuf>) -> Self {
        Error::File {
            path: path.into(),
            inner: Box::new(self),
        }
    }
}
