//! Batch experiment runner over `rmtde-core`: configs in, CSV tables out.

pub mod commands;
pub mod config;
pub mod error;
pub mod plotdata;
pub mod scenarios;
pub mod validate;

pub use commands::{run, Command, Report, RunOptions};
pub use error::{CliError, CliResult};
