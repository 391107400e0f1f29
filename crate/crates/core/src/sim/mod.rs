//! Simulators, experiment config, Monte Carlo runner, CSV output and the CLI.

pub mod cli;
pub mod config;
pub mod export;
pub mod runner;
pub mod simulate;

pub use config::{EstimatorConfig, RunConfig, SimConfig, System};
pub use runner::{
    checkpoint_grid, monte_carlo, run_identification, Checkpoint, McSummary, RunRecord,
};
