use serde::{Deserialize, Serialize};

use super::exec::{map_paths, Execution};
use crate::barrier::{Barrier, ControllerSpec};
use crate::error::{invalid, LabError, Result};
use crate::rng::standard_normal_quantile;
use crate::sde::{simulate_outcome, IntegratorConfig, PathEnd, SdeModel};

/// Wilson score interval for a binomial proportion.
pub fn wilson_interval(n_exits: u64, n_paths: u64, confidence: f64) -> Result<(f64, f64)> {
    if n_paths == 0 || n_exits > n_paths {
        return Err(invalid(format!("need 0 ≤ n_exits ≤ n_paths and n_paths ≥ 1, got {n_exits}/{n_paths}")));
    }
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(invalid(format!("confidence must lie in (0, 1), got {confidence}")));
    }
    let z = standard_normal_quantile(1.0 - (1.0 - confidence) / 2.0);
    let n = n_paths as f64;
    let p = n_exits as f64 / n;
    let z2n = z * z / n;
    let center = (p + z2n / 2.0) / (1.0 + z2n);
    let half = z / (1.0 + z2n) * (p * (1.0 - p) / n + z2n / (4.0 * n)).sqrt();
    let low = if n_exits == 0 { 0.0 } else { (center - half).clamp(0.0, p) };
    let high = if n_exits == n_paths { 1.0 } else { (center + half).clamp(p, 1.0) };
    Ok((low, high))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExitConfig {
    pub n_paths: u64,
    pub dt: f64,
    pub horizon: f64,
    pub seed: u64,
    pub bridge_correction: bool,
}

impl ExitConfig {
    pub fn integrator(&self, path_index: u64) -> IntegratorConfig {
        IntegratorConfig::new(self.dt, self.horizon)
            .with_bridge(self.bridge_correction)
            .with_stream(self.seed, path_index)
    }
}

/// Exit frequency over the feasible paths of an ensemble.
///
/// `n_paths` counts the paths the estimate is based on; paths on which the
/// controller became infeasible are reported in `n_infeasible` and left out.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExitEstimate {
    pub n_paths: u64,
    pub n_exits: u64,
    pub n_infeasible: u64,
    pub p_hat: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub dt: f64,
    pub horizon: f64,
    pub seed: u64,
    pub bridge_correction: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

pub fn estimate_exit_probability(
    model: &dyn SdeModel,
    controller: &ControllerSpec,
    barrier: &dyn Barrier,
    x0: &[f64],
    config: &ExitConfig,
) -> Result<ExitEstimate> {
    estimate_exit_probability_with(model, controller, barrier, x0, config, Execution::default())
}

pub fn estimate_exit_probability_with(
    model: &dyn SdeModel,
    controller: &ControllerSpec,
    barrier: &dyn Barrier,
    x0: &[f64],
    config: &ExitConfig,
    exec: Execution,
) -> Result<ExitEstimate> {
    if config.n_paths == 0 {
        return Err(invalid("n_paths must be at least 1"));
    }
    config.integrator(0).validate()?;
    controller.validate()?;
    let h0 = barrier.value(x0);
    if !(h0 > 0.0) {
        return Err(LabError::OutsideSafeSet { value: h0 });
    }

    let ends = map_paths(exec, config.n_paths, |i| {
        simulate_outcome(model, controller, barrier, x0, &config.integrator(i)).map(|o| o.end)
    });
    let (mut n_exits, mut n_infeasible) = (0u64, 0u64);
    for end in ends {
        match end? {
            PathEnd::Horizon => {}
            PathEnd::Exited { .. } => n_exits += 1,
            PathEnd::Infeasible { .. } => n_infeasible += 1,
        }
    }
    let n_paths = config.n_paths - n_infeasible;
    if n_paths == 0 {
        return Err(invalid("the controller was infeasible on every path"));
    }
    let mut warnings = Vec::new();
    if n_infeasible > 0 {
        warnings.push(format!(
            "controller infeasible on {n_infeasible} of {} paths; estimate uses the remaining {n_paths}",
            config.n_paths
        ));
    }
    let (ci_low, ci_high) = wilson_interval(n_exits, n_paths, 0.95)?;
    Ok(ExitEstimate {
        n_paths,
        n_exits,
        n_infeasible,
        p_hat: n_exits as f64 / n_paths as f64,
        ci_low,
        ci_high,
        dt: config.dt,
        horizon: config.horizon,
        seed: config.seed,
        bridge_correction: config.bridge_correction,
        warnings,
    })
}
