//! Estimators over ensembles of simulated paths.

mod b_tilde;
mod exec;
mod exit;
mod local_time;
mod stopping;

pub use b_tilde::{validate_b_tilde_bound, BTildeConfig, BTildeReport};
pub use exec::{map_paths, Execution};
pub use exit::{estimate_exit_probability, estimate_exit_probability_with, wilson_interval, ExitConfig, ExitEstimate};
pub use local_time::{
    cumulative_local_time, default_bandwidth, estimate_local_time, estimate_path_local_time, LocalTimeEstimate,
};
pub use stopping::{stopping_time_sequence, StoppingTimeRecord};
