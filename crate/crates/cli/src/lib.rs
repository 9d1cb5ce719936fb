//! Configuration parsing and command dispatch for the `totc` binary.

pub mod config;
pub mod error;
pub mod run;

pub use config::{parse_config, parse_config_str, Command, RunConfig};
pub use error::CliError;
pub use run::{run, RunOutcome};
