//! File formats, subcommands and the benchmark harness behind the
//! `convdistill` binary.

pub mod bench;
pub mod commands;
pub mod error;
pub mod formats;

pub use error::{CliError, CliResult};
