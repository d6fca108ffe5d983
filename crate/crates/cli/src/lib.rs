//! Configuration parsing and subcommand drivers for the `nsshape` binary.

pub mod commands;
pub mod config;

pub use commands::{run_subcommand, RunError, Subcommand};
pub use config::{parse_config, parse_config_str, RunConfig};
