use centralizer::CentralizerError;
use geometry_flow::FlowError;
use perturb::PerturbError;
use poincare::PoincareError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("unknown catalog entry {0:?}")]
    UnknownEntry(String),
    #[error("config: {0}")]
    Config(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error(transparent)]
    Poincare(#[from] PoincareError),
    #[error(transparent)]
    Centralizer(#[from] CentralizerError),
    #[error(transparent)]
    Perturb(#[from] PerturbError),
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::UnknownEntry(_) => "unknown_entry",
            CliError::Config(_) => "config",
            CliError::Io(_) => "io",
            CliError::Flow(_) => "flow",
            CliError::Poincare(_) => "poincare",
            CliError::Centralizer(_) => "centralizer",
            CliError::Perturb(_) => "perturb",
        }
    }

    /// Machine-readable form written to stderr.
    pub fn to_json(&self) -> String {
        serde_json::json!({ "error": self.kind(), "message": self.to_string() }).to_string()
    }
}
