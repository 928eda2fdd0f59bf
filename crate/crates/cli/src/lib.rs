//! Configuration handling and experiment orchestration behind the `riscov`
//! binary.

pub mod config;
pub mod error;
pub mod run;

pub use config::ExperimentConfig;
pub use error::{CliError, Result};
