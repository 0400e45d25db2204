//! Experiment harness: configuration, ensemble runs, verification studies
//! and their artifacts.

pub mod checks;
pub mod coeffs;
pub mod config;
pub mod error;
pub mod experiment;
pub mod studies;

pub use config::{parse_config, parse_config_str, RunConfig};
pub use error::{CliError, Result};
pub use experiment::{run_experiment, Experiment, RunOutput};

/// Environment variable holding the number of worker threads.
pub const WORKERS_ENV: &str = "NSF_WORKERS";
