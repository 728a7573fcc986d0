use thiserror::Error;

/// Errors surfaced by the numeric core.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("6D rotation vector is degenerate (norm or orthogonal residual below threshold)")]
    DegenerateSixD,
    #[error("query point is within {floor} m of a dipole source")]
    TooCloseToSource { floor: f64 },
    #[error("shape mismatch in {op}: {detail}")]
    ShapeMismatch { op: &'static str, detail: String },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("pose estimation failed: {0}")]
    EstimationFailed(String),
    #[error("standardization statistics of model and dataset differ")]
    StatsMismatch,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("malformed data: {0}")]
    Format(String),
    #[error("unsupported format version: expected {expected}, found {found}")]
    Version { expected: String, found: String },
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
