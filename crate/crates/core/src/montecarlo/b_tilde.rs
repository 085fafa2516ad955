use serde::{Deserialize, Serialize};

use super::exec::{map_paths, Execution};
use super::local_time::{default_bandwidth, estimate_local_time};
use crate::barrier::{ControllerSpec, ItoTerms, ReciprocalSpec};
use crate::error::{invalid, LabError, Result};
use crate::sde::{simulate_path, IntegratorConfig, ModelEval, PathSample, SdeModel};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BTildeConfig {
    pub n_pilot: u64,
    pub n_main: u64,
    pub dt: f64,
    pub horizon: f64,
    pub seed: u64,
    pub bridge_correction: bool,
    pub delta: f64,
    /// Local-time bandwidth; `None` uses `5 |∂B/∂x σ|(x0) √dt`.
    pub eps: Option<f64>,
}

impl BTildeConfig {
    fn integrator(&self, path_index: u64) -> IntegratorConfig {
        IntegratorConfig::new(self.dt, self.horizon)
            .with_bridge(self.bridge_correction)
            .with_stream(self.seed, path_index)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BTildeReport {
    #[serde(rename = "B0")]
    pub b0: f64,
    /// `b̃ = α₃(α₂⁻¹(1/B₀))`.
    pub b_tilde_rate: f64,
    #[serde(rename = "M")]
    pub m: f64,
    pub delta: f64,
    pub eps: f64,
    pub n_pilot: u64,
    pub n_main: u64,
    pub n_violations: u64,
    /// Main paths that left the safe set; each also counts as a violation.
    pub n_exits: u64,
    pub n_infeasible: u64,
    pub violation_fraction: f64,
    pub standard_error: f64,
    /// Largest `∫ (drift of B − b̃) dτ` over a stretch where `B < B₀`.
    pub max_drift_excess: f64,
    pub seed: u64,
    pub dt: f64,
    pub horizon: f64,
}

/// `B = 1/h` along the path, its diffusion row `∂B/∂x σ = −h⁻² σ̃` per grid
/// point, and the number of usable grid points.
fn reciprocal_path(path: &PathSample) -> (Vec<f64>, usize) {
    let mut usable = path.len();
    if path.exited || path.infeasible_at.is_some() {
        // The last state of an exited path lies outside the safe set.
        usable = if path.exited { path.len() - 1 } else { path.len() };
    }
    let b = path.barrier_values[..usable].iter().map(|h| 1.0 / h).collect();
    (b, usable)
}

fn half_local_time(path: &PathSample, b0: f64, eps: f64) -> Result<f64> {
    let (b, usable) = reciprocal_path(path);
    let steps = usable.saturating_sub(1);
    let rates: Vec<f64> = (0..steps)
        .map(|k| {
            let h = path.barrier_values[k];
            path.sigma_tilde_sq(k) / h.powi(4)
        })
        .collect();
    Ok(0.5 * estimate_local_time(&path.times[..usable], &b, &rates, b0, eps)?.l_hat)
}

struct MainOutcome {
    violated: bool,
    exited: bool,
    infeasible: bool,
    drift_excess: f64,
}

fn check_main_path(
    path: &PathSample,
    model: &dyn SdeModel,
    spec: &ReciprocalSpec,
    b0: f64,
    m: f64,
    rate: f64,
) -> Result<MainOutcome> {
    let barrier = spec.barrier.as_ref();
    let infeasible = path.infeasible_at.is_some();
    let (b, usable) = reciprocal_path(path);
    let mut violated = path.exited || infeasible;
    let mut eval = ModelEval::for_model(model);
    let mut terms = ItoTerms::new(model.dim_x(), model.dim_u(), model.dim_w());
    let mut bound = b0 + m;
    let mut run = 0.0;
    let mut drift_excess = f64::NEG_INFINITY;
    let steps = usable.saturating_sub(1).min(path.n_steps());
    for k in 0..usable {
        if !b[k].is_finite() || b[k] > bound {
            violated = true;
        }
        if k == steps {
            break;
        }
        let h = path.barrier_values[k];
        let dt = path.times[k + 1] - path.times[k];
        let dw = path.increment(k);
        if b[k] >= b0 {
            let sig = path.sigma_tilde(k);
            let stoch: f64 = sig.iter().zip(dw).map(|(s, w)| s * w).sum();
            bound += -stoch / (h * h);
            run = 0.0;
        } else {
            let x = path.state(k);
            eval.evaluate(model, x)?;
            terms.compute(barrier, &eval, x, h, true);
            let mu = terms.mu_tilde(path.control(k));
            let drift_b = -mu / (h * h) + terms.sigma_tilde_sq() / (h * h * h);
            run += (drift_b - rate) * dt;
            drift_excess = drift_excess.max(run);
        }
        bound += rate * dt;
    }
    Ok(MainOutcome {
        violated,
        exited: path.exited,
        infeasible,
        drift_excess,
    })
}

/// Checks empirically that `B_t ≤ B̃_t = B₀ + M + b̃t + ∫ ∂B/∂x σ 1{B ≥ B₀} dW`
/// holds on all of `[0, horizon]` with probability at least `1 − δ/2`.
///
/// `M` is the `1 − δ/2` quantile of `½ L^{B₀}(B)` over `n_pilot` paths on
/// streams `0..n_pilot`; the main phase uses the next `n_main` streams.
pub fn validate_b_tilde_bound(
    model: &dyn SdeModel,
    controller: &ControllerSpec,
    spec: &ReciprocalSpec,
    x0: &[f64],
    config: &BTildeConfig,
    exec: Execution,
) -> Result<BTildeReport> {
    if !(config.delta > 0.0 && config.delta <= 1.0) {
        return Err(invalid(format!("delta must lie in (0, 1], got {}", config.delta)));
    }
    if config.n_pilot == 0 || config.n_main == 0 {
        return Err(invalid("pilot and main ensembles need at least one path each"));
    }
    config.integrator(0).validate()?;
    let barrier = spec.barrier.as_ref();
    let h0 = barrier.value(x0);
    if !(h0 > 0.0) {
        return Err(LabError::OutsideSafeSet { value: h0 });
    }
    let b0 = 1.0 / h0;
    if !b0.is_finite() {
        return Err(invalid("B(x0) is not finite"));
    }
    let rate = spec.drift_bound(b0);
    let eps = match config.eps {
        Some(e) => e,
        None => {
            let mut eval = ModelEval::for_model(model);
            eval.evaluate(model, x0)?;
            let mut terms = ItoTerms::new(model.dim_x(), model.dim_u(), model.dim_w());
            terms.compute(barrier, &eval, x0, h0, false);
            default_bandwidth(terms.sigma_tilde_sq().sqrt() / (h0 * h0), config.dt)
        }
    };
    if !(eps > 0.0) {
        return Err(invalid("local-time bandwidth is zero; give eps explicitly"));
    }

    let pilot = map_paths(exec, config.n_pilot, |i| {
        let path = simulate_path(model, controller, barrier, x0, &config.integrator(i))?;
        half_local_time(&path, b0, eps)
    });
    let mut half_l = pilot.into_iter().collect::<Result<Vec<f64>>>()?;
    half_l.sort_by(f64::total_cmp);
    let q = 1.0 - config.delta / 2.0;
    let idx = ((q * half_l.len() as f64).ceil() as usize).clamp(1, half_l.len()) - 1;
    let m = half_l[idx];

    let main = map_paths(exec, config.n_main, |i| {
        let path = simulate_path(model, controller, barrier, x0, &config.integrator(config.n_pilot + i))?;
        check_main_path(&path, model, spec, b0, m, rate)
    });
    let (mut n_violations, mut n_exits, mut n_infeasible) = (0u64, 0u64, 0u64);
    let mut max_drift_excess = f64::NEG_INFINITY;
    for outcome in main {
        let o = outcome?;
        n_violations += o.violated as u64;
        n_exits += o.exited as u64;
        n_infeasible += o.infeasible as u64;
        max_drift_excess = max_drift_excess.max(o.drift_excess);
    }
    let n = config.n_main as f64;
    let violation_fraction = n_violations as f64 / n;
    Ok(BTildeReport {
        b0,
        b_tilde_rate: rate,
        m,
        delta: config.delta,
        eps,
        n_pilot: config.n_pilot,
        n_main: config.n_main,
        n_violations,
        n_exits,
        n_infeasible,
        violation_fraction,
        standard_error: (violation_fraction * (1.0 - violation_fraction) / n).sqrt(),
        max_drift_excess: if max_drift_excess.is_finite() { max_drift_excess } else { 0.0 },
        seed: config.seed,
        dt: config.dt,
        horizon: config.horizon,
    })
}
