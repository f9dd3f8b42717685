//! Batch driver: configuration files, solution files and the subcommands
//! behind the `nehari` binary.

pub mod commands;
pub mod config;
pub mod solution;

pub use commands::{CliError, Output};
pub use config::{ConfigError, RunConfig, SweepAxis};
pub use solution::Solution;
