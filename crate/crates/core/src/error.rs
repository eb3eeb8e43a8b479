use std::path::PathBuf;

/// Errors shared across the whole library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("missing file: {0}")]
    MissingFile(PathBuf),

    #[error("bad header in {path}: {detail}")]
    BadHeader { path: PathBuf, detail: String },

    #[error("truncated payload in {path}: expected {expected} bytes, got {actual}")]
    TruncatedPayload {
        path: PathBuf,
        expected: usize,
        actual: usize,
    },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("frame times are not strictly increasing at index {index}")]
    NonMonotonicTimes { index: usize },

    #[error("missing flow field {from_frame} -> {to_frame}")]
    MissingFlow { from_frame: usize, to_frame: usize },

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("target time {t} outside covered range [{lo}, {hi}]")]
    TimeOutOfRange { t: f64, lo: f64, hi: f64 },

    #[error("insufficient frames: need {needed}, have {available} ({context})")]
    InsufficientFrames {
        needed: usize,
        available: usize,
        context: String,
    },

    #[error("track {track_id} references missing frame {frame_index}")]
    MissingTrackFrame { track_id: u64, frame_index: usize },

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Image(#[from] image::ImageError),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Wraps the error with job/file context for CLI reporting.
    pub fn with_context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
