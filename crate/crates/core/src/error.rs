use thiserror::Error;

/// Errors raised by the simulator.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("singular state: density {rho:e} is at or below the floor {floor:e}")]
    SingularState { rho: f64, floor: f64 },

    #[error("operation requires a gas law in normalized pressure mode")]
    ModeMismatch,

    #[error("blow-up: max wave speed {speed:e} exceeds ceiling {ceiling:e}")]
    BlowUp { speed: f64, ceiling: f64 },

    #[error("negative density {value:e} in cell {cell}")]
    NegativeDensity { cell: usize, value: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("realization {realization}, step {step}: {source}")]
    Step {
        realization: u32,
        step: u64,
        #[source]
        source: Box<SimError>,
    },

    #[error("{} realization(s) failed; first: {first}", .count)]
    EnsembleFailed { count: usize, first: Box<SimError> },

    #[error("i/o: {0}")]
    Io(String),
}

impl From<std::io::Error> for SimError {
    fn from(e: std::io::Error) -> Self {
        SimError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, SimError>;
