//! File formats, configuration, the parallel ensemble runner and the
//! command implementations built on `exciton-core`.

pub mod analyze;
pub mod bench;
pub mod config;
pub mod csvio;
pub mod error;
pub mod runner;

pub use error::{CliError, CliResult};
