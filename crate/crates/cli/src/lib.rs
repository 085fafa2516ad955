//! Command-line front end: experiment configuration, the registered
//! experiments and their on-disk reports.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod experiments;
pub mod report;

pub use config::{Experiment, ExperimentConfig, Overrides, ResolvedConfig};
pub use error::CliError;
pub use experiments::{run_experiment, run_experiment_with, ExperimentReport, SummaryRow};
