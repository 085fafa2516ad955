use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::sde::PathSample;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalTimeEstimate {
    pub level: f64,
    pub eps: f64,
    #[serde(rename = "L_hat")]
    pub l_hat: f64,
    /// `(X_t−a)⁺ − (X_0−a)⁺ − Σ 1{X_s>a} ΔX_s − ½ L_hat`.
    pub tanaka_residual: f64,
    /// Set when `eps` is below the mean step displacement.
    pub noisy: bool,
}

/// `5 σ̃ √dt`.
pub fn default_bandwidth(sigma_tilde: f64, dt: f64) -> f64 {
    5.0 * sigma_tilde.abs() * dt.sqrt()
}

fn check(times: &[f64], values: &[f64], qv_rates: &[f64], eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(invalid(format!("bandwidth must be positive, got {eps}")));
    }
    if times.is_empty() || times.len() != values.len() || qv_rates.len() + 1 < times.len() {
        return Err(invalid("local time needs matching times/values and one rate per step"));
    }
    Ok(())
}

/// Occupation-time estimate of the local time at `level` of a discretely
/// observed semimartingale, weighting each step by its quadratic-variation
/// rate `qv_rates[k]` (the squared diffusion at the step's left point).
pub fn estimate_local_time(times: &[f64], values: &[f64], qv_rates: &[f64], level: f64, eps: f64) -> Result<LocalTimeEstimate> {
    check(times, values, qv_rates, eps)?;
    let mut occupation = 0.0;
    let mut integral = 0.0;
    let mut displacement = 0.0;
    let n = times.len() - 1;
    for k in 0..n {
        let dt = times[k + 1] - times[k];
        let dx = values[k + 1] - values[k];
        if (values[k] - level).abs() < eps / 2.0 {
            occupation += qv_rates[k] * dt;
        }
        if values[k] > level {
            integral += dx;
        }
        displacement += dx.abs();
    }
    let l_hat = occupation / eps;
    let pos = |x: f64| (x - level).max(0.0);
    let tanaka_residual = pos(values[n]) - pos(values[0]) - integral - 0.5 * l_hat;
    let noisy = n > 0 && eps < displacement / n as f64;
    Ok(LocalTimeEstimate {
        level,
        eps,
        l_hat,
        tanaka_residual,
        noisy,
    })
}

/// Local time of `h(x_t)` along a recorded path.
pub fn estimate_path_local_time(path: &PathSample, level: f64, eps: f64) -> Result<LocalTimeEstimate> {
    let rates: Vec<f64> = (0..path.n_steps()).map(|k| path.sigma_tilde_sq(k)).collect();
    estimate_local_time(&path.times, &path.barrier_values, &rates, level, eps)
}

/// The occupation estimate at every grid time, starting from 0.
pub fn cumulative_local_time(times: &[f64], values: &[f64], qv_rates: &[f64], level: f64, eps: f64) -> Result<Vec<f64>> {
    check(times, values, qv_rates, eps)?;
    let mut out = Vec::with_capacity(times.len());
    let mut acc = 0.0;
    out.push(0.0);
    for k in 0..times.len() - 1 {
        if (values[k] - level).abs() < eps / 2.0 {
            acc += qv_rates[k] * (times[k + 1] - times[k]);
        }
        out.push(acc / eps);
    }
    Ok(out)
}
