use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("crop size {crop} exceeds {axis} of {dim} pixels")]
    CropTooLarge {
        axis: &'static str,
        crop: usize,
        dim: usize,
    },

    #[error("shape mismatch: expected {expected:?}, found {found:?}")]
    ShapeMismatch {
        expected: Vec<usize>,
        found: Vec<usize>,
    },

    #[error("expected a {expected}-D array, found shape {found:?}")]
    Dimensionality { expected: usize, found: Vec<usize> },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("malformed npy header: {0}")]
    NpyHeader(String),

    #[error("unsupported npy dtype {0:?}")]
    NpyDtype(String),

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("mask has no foreground pixels")]
    EmptyForeground,

    #[error("ground-truth mask is empty")]
    EmptyGroundTruth,

    #[error("evaluation region is empty")]
    EmptyRegion,

    #[error("region contains a single class ({positives} positives, {negatives} negatives)")]
    DegenerateClasses { positives: usize, negatives: usize },

    #[error("average surface distance undefined: {0} mask is empty")]
    UndefinedAsd(&'static str),

    #[error("all paired differences are zero")]
    DegenerateTest,

    #[error("instance too large for brute-force oracle: {0}")]
    InstanceTooLarge(String),

    #[error("dataset layout: {path}: {reason}")]
    Layout { path: PathBuf, reason: String },

    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Errors caused by the data itself (single-class regions, empty masks, an
    /// untestable paired sample) rather than by malformed input.
    pub fn is_degenerate(&self) -> bool {
        match self {
            Error::EmptyForeground
            | Error::EmptyGroundTruth
            | Error::EmptyRegion
            | Error::DegenerateClasses { .. }
            | Error::UndefinedAsd(_)
            | Error::DegenerateTest => true,
            Error::File { source, .. } => source.is_degenerate(),
            _ => false,
        }
    }

    pub(crate) fn in_file(self, path: impl Into<PathBuf>) -> Error {
        Error::File {
            path: path.into(),
            source: Box::new(self),
        }
    }
}
