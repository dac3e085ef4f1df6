use gamma_lab::LabError;
use serde_json::json;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("{0}")]
    Lab(#[from] LabError),
    #[error("invariant check failed: {0}")]
    Invariant(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Io(_) => 3,
            CliError::Invariant(_) => 8,
            CliError::Lab(e) => match e {
                LabError::Parse { .. } => 2,
                LabError::Io(_) => 3,
                LabError::QuadratureFailure(_) | LabError::InconclusiveQuadrature { .. } => 5,
                LabError::Divergent { .. } => 6,
                LabError::EstimationFailure(_) => 7,
                _ => 4,
            },
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Io(_) => "io",
            CliError::Invariant(_) => "invariant",
            CliError::Lab(e) => match e {
                LabError::Parse { .. } => "parse",
                LabError::Io(_) => "io",
                LabError::QuadratureFailure(_) | LabError::InconclusiveQuadrature { .. } => "numerical",
                LabError::Divergent { .. } => "divergent",
                LabError::EstimationFailure(_) => "estimation",
                _ => "invalid_input",
            },
        }
    }

    /// One-line JSON record for stderr and `error.json`.
    pub fn record(&self) -> String {
        json!({ "error": self.kind(), "exit_code": self.exit_code(), "message": self.to_string() }).to_string()
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}
