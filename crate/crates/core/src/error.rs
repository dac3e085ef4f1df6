use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum LabError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid interval ({a}, {b})")]
    InvalidInterval { a: f64, b: f64 },
    #[error("invalid partition: {0}")]
    InvalidPartition(String),
    #[error("invalid flatten spec: {0}")]
    InvalidSpec(String),
    #[error("invalid delta ladder: {0}")]
    InvalidLadder(String),
    #[error("degenerate profile: {0}")]
    DegenerateProfile(String),
    #[error("profile is not normalized (integral {integral})")]
    NotNormalized { integral: f64 },
    #[error("quadrature failure: {0}")]
    QuadratureFailure(String),
    #[error("inconclusive quadrature: error estimate {error:e} exceeds tolerance for value {value:e}")]
    InconclusiveQuadrature { value: f64, error: f64 },
    #[error("energy diverges at x = {location} (jump {jump})")]
    Divergent { location: f64, jump: f64 },
    #[error("estimation failure: {0}")]
    EstimationFailure(String),
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for LabError {
    fn from(e: std::io::Error) -> Self {
        LabError::Io(e.to_string())
    }
}

pub type Result<T, E = LabError> = std::result::Result<T, E>;
