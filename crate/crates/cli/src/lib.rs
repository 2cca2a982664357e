//! File formats, configuration, and the train/analyze stages behind the
//! `morsedyn` command-line tool.

pub mod commands;
pub mod config;
pub mod error;
pub mod formats;
pub mod run;

pub use error::{CliError, CliResult};
