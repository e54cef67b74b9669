//! Configuration-driven front end: distances, fitting, model comparison,
//! prediction and simulation as reproducible runs.

pub mod commands;
pub mod config;
pub mod error;
pub mod io;

use std::path::{Path, PathBuf};

pub use config::RunConfig;
pub use error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Distances,
    Fit,
    Compare,
    Predict,
    Simulate,
}

/// Loads the config, applies a seed override and runs one command.
pub fn run(command: Command, config: &Path, seed: Option<u64>) -> Result<Vec<PathBuf>, CliError> {
    let mut cfg = RunConfig::load(config)?;
    if let Some(s) = seed {
        cfg.override_seed(s);
    }
    match command {
        Command::Distances => commands::cmd_distances(&cfg),
        Command::Fit => commands::cmd_fit(&cfg),
        Command::Compare => commands::cmd_compare(&cfg),
        Command::Predict => commands::cmd_predict(&cfg),
        Command::Simulate => commands::cmd_simulate(&cfg),
    }
}
