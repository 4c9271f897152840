use crate::config::ConfigError;
use ibb_sim::SimError;
use thiserror::Error;

/// Failure of a verb, mapped onto the process exit status.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(#[from] ConfigError),
    #[error("simulation diverged: {0}")]
    Diverged(String),
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("requirements not met: {0}")]
    Requirements(String),
    #[error("{0}")]
    Io(String),
    #[error("model error: {0}")]
    Model(String),
}

impl CliError {
    /// 2 parse/validation, 3 divergence, 4 infeasible, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Diverged(_) => 3,
            CliError::Infeasible(_) => 4,
            CliError::Requirements(_) | CliError::Io(_) | CliError::Model(_) => 1,
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Diverged { .. } => CliError::Diverged(e.to_string()),
            other => CliError::Model(other.to_string()),
        }
    }
}

impl From<ibb_core::CoreError> for CliError {
    fn from(e: ibb_core::CoreError) -> Self {
        CliError::Model(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}
