use thiserror::Error;

/// Errors produced anywhere in the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum KpamError {
    #[error("direction must have unit norm (got norm {norm})")]
    NonUnitDirection { norm: f64 },

    #[error("axis endpoints coincide (separation {separation} m)")]
    DegenerateAxis { separation: f64 },

    #[error("unknown keypoint '{0}'")]
    UnknownKeypoint(String),

    #[error("invalid keypoint set: {0}")]
    InvalidKeypoints(String),

    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("keypoint names differ: {0}")]
    NameMismatch(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("validation error at {path}: {message}")]
    Validation { path: String, message: String },

    #[error("missing keypoints: {}", .0.join(", "))]
    MissingKeypoint(Vec<String>),

    #[error("not applicable: {0}")]
    NotApplicable(String),

    #[error("heatmap {index} is not normalized (sum {sum})")]
    UnnormalizedHeatmap { index: usize, sum: f64 },

    #[error("index {index} out of range (len {len})")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("depth must be positive (got {0})")]
    NonPositiveDepth(f64),

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl KpamError {
    pub(crate) fn validation(path: impl Into<String>, message: impl Into<String>) -> Self {
        KpamError::Validation { path: path.into(), message: message.into() }
    }
}

impl From<std::io::Error> for KpamError {
    fn from(e: std::io::Error) -> Self {
        KpamError::Io(e.to_string())
    }
}

pub type Result<T, E = KpamError> = std::result::Result<T, E>;
