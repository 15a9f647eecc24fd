//! Experiment harness around `bmf-core`: configuration, file formats and the
//! `bmf` subcommands.

pub mod commands;
pub mod config;
pub mod error;
pub mod io;

pub use config::ExperimentConfig;
pub use error::{CliError, CliResult};
