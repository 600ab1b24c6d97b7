//! Seeded Monte Carlo experiment runner for `fairdiv-core`.
//!
//! A run is described by an [`ExperimentConfig`], executed by
//! [`run_experiment`], and rendered as a [`RunReport`] in CSV or JSON.
//! [`acceptance`] holds the acceptance criteria behind `verify-all`.

pub mod acceptance;
pub mod config;
pub mod experiment;
pub mod report;

pub use config::{parse_config, ConfigError, ExperimentConfig, RawConfig, Subcommand};
pub use experiment::{run_experiment, ExperimentError};
pub use report::{RunReport, Summary, TrialRow};
