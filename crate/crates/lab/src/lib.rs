//! Experiment plumbing around `brenier-core`: a TOML experiment format, a
//! runner that writes JSON/CSV reports, exchange formats for samples,
//! radial profiles and semi-discrete plans, and the target catalog.

pub mod catalog;
pub mod config;
pub mod error;
pub mod io;
pub mod runner;

pub use config::ExperimentConfig;
pub use error::{ConfigError, LabError};
pub use runner::{run_experiment, ExperimentReport, RunOutcome};
