//! The `coat` command line: instance generation, oracle plans, datasets,
//! training, evaluation, curriculum rounds, PDDL export and reports.

pub mod checkpoint;
pub mod commands;
pub mod config;
pub mod error;
pub mod files;
pub mod pddl;
pub mod report;

pub use commands::{run, Cli};
pub use error::{CliError, Result};
