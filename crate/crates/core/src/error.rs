use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate point configuration: {0}")]
    DegenerateConfiguration(String),
    #[error("point maps to the horizon line (homogeneous depth {0:e})")]
    PointAtHorizon(f64),
    #[error("bin extent {extent:.3} m along {axis} outside [0.5, 1.0] m")]
    BinExtentOutOfRange { axis: &'static str, extent: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: String, got: String },
    #[error("need at least {needed} samples, got {got}")]
    InsufficientSamples { needed: usize, got: usize },
    #[error("mixture component {0} collapsed after re-seeding")]
    DegenerateComponent(usize),
    #[error("empty patch")]
    EmptyPatch,
    #[error("unknown feature block `{0}`")]
    UnknownBlock(String),
    #[error("empty feature mask")]
    EmptyMask,
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("rectangle has zero area")]
    ZeroArea,
    #[error("grid has no bins")]
    EmptyGrid,
    #[error("training data contains a single class")]
    SingleClassData,
    #[error("training data has no samples of class `{0}`")]
    MissingClass(String),
    #[error("{path}:{line}: {message}")]
    Parse { path: String, line: usize, message: String },
    #[error("unknown activity class `{0}`")]
    UnknownClass(String),
    #[error("tracklet {tracklet} changes class from {from} to {to}")]
    ClassChangeWithinTracklet { tracklet: u32, from: String, to: String },
    #[error("test set is empty")]
    EmptyTestSet,
    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),
    #[error("invalid image data: {0}")]
    Format(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn dims(expected: (usize, usize), got: (usize, usize)) -> Self {
        Error::DimensionMismatch {
            expected: format!("{}x{}", expected.0, expected.1),
            got: format!("{}x{}", got.0, got.1),
        }
    }

    pub(crate) fn len(expected: usize, got: usize) -> Self {
        Error::DimensionMismatch {
            expected: expected.to_string(),
            got: got.to_string(),
        }
    }
}
