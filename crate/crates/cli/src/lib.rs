//! Batch front-end for `anipar`: config parsing, experiment orchestration and
//! plot-ready artifacts.

pub mod artifacts;
pub mod commands;
pub mod config;
pub mod suites;

pub use commands::{run, CliError, Command, Options, Outcome};
pub use config::{ConfigError, RunConfig};
