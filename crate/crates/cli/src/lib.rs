//! Experiment orchestration for the `kpfcp` command-line tool.

pub mod cli;
pub mod config;
pub mod error;
pub mod experiment;
pub mod manifest;

pub use config::{ExperimentConfig, Overrides};
pub use error::{CliError, Result};
pub use experiment::{run_experiment, sweep_orders};
pub use manifest::Manifest;
