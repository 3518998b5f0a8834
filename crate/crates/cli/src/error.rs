use stoch_euler::SimError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("invariant failure: {0}")]
    Invariant(String),

    #[error("run failed: {0}")]
    Run(SimError),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// Simulator errors raised while building a config are config errors; the
/// runner maps its own errors to [`CliError::Run`] explicitly.
impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            _ => 1,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Invariant(_) => "invariant",
            CliError::Run(_) => "run",
            CliError::Io(_) => "io",
        }
    }
}
