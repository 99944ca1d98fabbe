//! Configuration-driven experiments on top of `gramtomo-core`: JSON config
//! loading, artifact formats, parallel trial scheduling and the `gramtomo`
//! command line.

pub mod app;
pub mod commands;
pub mod config;
pub mod error;
pub mod formats;
pub mod parallel;

pub use commands::{execute, Command, Report};
pub use config::{ExperimentConfig, Overrides};
pub use error::{CliError, CliResult};
