//! Command-line harness for the `neumann-rigidity` lab: configuration,
//! exit codes, and the `constants | eigen | solve | sweep | bifurcate |
//! check` verbs.

pub mod commands;
pub mod config;
pub mod error;

pub use config::{DomainSpec, ExperimentConfig};
pub use error::{CliError, CliResult};
