//! Configuration, experiment presets and run orchestration for the
//! `stoch-euler` command-line tool.

pub mod config;
pub mod error;
pub mod run;

pub use config::{load_preset, resolve, RunConfig};
pub use error::CliError;
