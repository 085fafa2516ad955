//! The registered experiments.

use std::sync::Arc;

use barrierlab_core::barrier::{make_controller, AffineBarrier, AlphaFn, ControllerSpec, ReciprocalSpec, Unconstrained};
use barrierlab_core::feller::{classify_boundary, BoundaryCase, FellerClassification, RatioSpec};
use barrierlab_core::montecarlo::{
    default_bandwidth, estimate_exit_probability_with, estimate_local_time, map_paths, stopping_time_sequence,
    validate_b_tilde_bound, wilson_interval, BTildeConfig, BTildeReport, Execution, ExitConfig, ExitEstimate,
};
use barrierlab_core::sde::{simulate_path, IntegratorConfig, PathSample, ScalarSde};
use serde::Serialize;
use serde_json::Value;
use statrs::function::erf::erfc;

use crate::config::{Experiment, ResolvedConfig};
use crate::error::CliError;

/// One row of `summary.csv`. Counting columns are empty for experiments that
/// do not estimate an event frequency.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub experiment: String,
    pub cell_id: String,
    pub n_paths: u64,
    pub dt: f64,
    pub horizon: f64,
    pub n_exits: Option<u64>,
    pub p_hat: Option<f64>,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
    pub classifier_tag: String,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentReport {
    pub experiment: Experiment,
    pub seed: u64,
    pub config: ResolvedConfig,
    pub cells: Vec<SummaryRow>,
    pub details: Value,
    pub digest: Vec<String>,
    #[serde(skip)]
    pub sample_path: Option<PathSample>,
}

pub fn run_experiment(cfg: &ResolvedConfig) -> Result<ExperimentReport, CliError> {
    run_experiment_with(cfg, Execution::default())
}

pub fn run_experiment_with(cfg: &ResolvedConfig, exec: Execution) -> Result<ExperimentReport, CliError> {
    let mut out = Output::default();
    match cfg.experiment {
        Experiment::BrownianCounterexample => brownian_counterexample(cfg, exec, &mut out)?,
        Experiment::ZcbfFails => zcbf_fails(cfg, exec, &mut out)?,
        Experiment::ModifiedZcbfSafe => {
            let spec = ControllerSpec::modified_zcbf(alpha3(cfg));
            safe_controller(cfg, exec, spec, &mut out)?
        }
        Experiment::RcbfSafe => safe_controller(cfg, exec, ControllerSpec::rcbf(alpha3(cfg)), &mut out)?,
        Experiment::DivergenceRateSweep => divergence_rate_sweep(cfg, exec, &mut out)?,
        Experiment::StoppingTimes => stopping_times(cfg, exec, &mut out)?,
        Experiment::TanakaCheck => tanaka_check(cfg, exec, &mut out)?,
        Experiment::BTildeBound => b_tilde_bound(cfg, exec, &mut out)?,
    }
    Ok(ExperimentReport {
        experiment: cfg.experiment,
        seed: cfg.seed,
        config: cfg.clone(),
        cells: out.rows,
        details: out.details,
        digest: out.digest,
        sample_path: out.sample_path,
    })
}

#[derive(Default)]
struct Output {
    rows: Vec<SummaryRow>,
    details: Value,
    digest: Vec<String>,
    sample_path: Option<PathSample>,
}

fn json<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report types serialise")
}

fn alpha3(cfg: &ResolvedConfig) -> AlphaFn {
    cfg.alpha3.unwrap_or(AlphaFn::identity())
}

fn with_bound(spec: ControllerSpec, cfg: &ResolvedConfig) -> ControllerSpec {
    match cfg.u_max {
        Some(m) => spec.with_bound(m),
        None => spec,
    }
}

fn dt_label(dt: f64) -> String {
    format!("dt={dt:e}")
}

fn exit_row(cfg: &ResolvedConfig, cell_id: String, est: &ExitEstimate, tag: &str) -> SummaryRow {
    SummaryRow {
        experiment: cfg.experiment.name().into(),
        cell_id,
        n_paths: est.n_paths,
        dt: est.dt,
        horizon: est.horizon,
        n_exits: Some(est.n_exits),
        p_hat: Some(est.p_hat),
        ci_low: Some(est.ci_low),
        ci_high: Some(est.ci_high),
        classifier_tag: tag.into(),
        seed: est.seed,
    }
}

fn plain_row(cfg: &ResolvedConfig, cell_id: String, n_paths: u64, dt: f64) -> SummaryRow {
    SummaryRow {
        experiment: cfg.experiment.name().into(),
        cell_id,
        n_paths,
        dt,
        horizon: cfg.horizon,
        n_exits: None,
        p_hat: None,
        ci_low: None,
        ci_high: None,
        classifier_tag: String::new(),
        seed: cfg.seed,
    }
}

fn exit_config(cfg: &ResolvedConfig, dt: f64) -> ExitConfig {
    ExitConfig {
        n_paths: cfg.n_paths,
        dt,
        horizon: cfg.horizon,
        seed: cfg.seed,
        bridge_correction: cfg.bridge_correction,
    }
}

/// `2Φ(−x0/(σ√T))`: probability that `x0 + σW` reaches 0 before `T`.
pub fn brownian_exit_oracle(x0: f64, sigma: f64, horizon: f64) -> f64 {
    if sigma == 0.0 {
        return 0.0;
    }
    erfc(x0 / (sigma * (2.0 * horizon).sqrt()))
}

/// Runs one exit estimate per step size and records path 0 of the finest one.
fn exit_sweep(
    cfg: &ResolvedConfig,
    exec: Execution,
    model: &ScalarSde,
    spec: &ControllerSpec,
    out: &mut Output,
) -> Result<Vec<ExitEstimate>, CliError> {
    let barrier = AffineBarrier::identity();
    let mut estimates = Vec::new();
    for &dt in &cfg.dt {
        let est = estimate_exit_probability_with(model, spec, &barrier, &[cfg.x0], &exit_config(cfg, dt), exec)?;
        out.rows.push(exit_row(cfg, dt_label(dt), &est, ""));
        out.digest.push(format!(
            "{}: p_hat = {:.5} [{:.5}, {:.5}] ({} / {} paths{})",
            dt_label(dt),
            est.p_hat,
            est.ci_low,
            est.ci_high,
            est.n_exits,
            est.n_paths,
            if est.n_infeasible > 0 { format!(", {} infeasible", est.n_infeasible) } else { String::new() }
        ));
        estimates.push(est);
    }
    let finest = cfg.dt.iter().copied().fold(f64::INFINITY, f64::min);
    let icfg = IntegratorConfig::new(finest, cfg.horizon)
        .with_bridge(cfg.bridge_correction)
        .with_stream(cfg.seed, 0);
    out.sample_path = Some(simulate_path(model, spec, &barrier, &[cfg.x0], &icfg)?);
    Ok(estimates)
}

#[derive(Serialize)]
struct OracleDetails {
    oracle: f64,
    estimates: Vec<ExitEstimate>,
    abs_error: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    min_zcbf_margin_on_grid: Option<f64>,
}

fn brownian_counterexample(cfg: &ResolvedConfig, exec: Execution, out: &mut Output) -> Result<(), CliError> {
    out.digest.push(format!(
        "Brownian motion from x0 = {} with sigma = {}, no control, safe set h(x) = x > 0",
        cfg.x0, cfg.sigma
    ));
    let model = ScalarSde::brownian(cfg.sigma);
    let estimates = exit_sweep(cfg, exec, &model, &ControllerSpec::none(), out)?;
    let oracle = brownian_exit_oracle(cfg.x0, cfg.sigma, cfg.horizon);
    out.digest.push(format!("reflection-principle oracle 2Φ(−x0/(σ√T)) = {oracle:.5}"));
    out.details = json(&OracleDetails {
        oracle,
        abs_error: estimates.iter().map(|e| (e.p_hat - oracle).abs()).collect(),
        estimates,
        min_zcbf_margin_on_grid: None,
    });
    Ok(())
}

fn zcbf_fails(cfg: &ResolvedConfig, exec: Execution, out: &mut Output) -> Result<(), CliError> {
    out.digest.push(format!(
        "dx = u dt + {} dW from x0 = {}, ZCBF min-norm controller for h(x) = x",
        cfg.sigma, cfg.x0
    ));
    let model = ScalarSde::single_integrator(cfg.sigma);
    let spec = with_bound(ControllerSpec::zcbf(), cfg);
    // The condition μ̃ + h ≥ 0 is met by the controller at every interior state.
    let barrier = AffineBarrier::identity();
    let ctrl = make_controller(spec, &barrier, &model)?;
    let mut min_margin = f64::INFINITY;
    for i in 0..=400 {
        let x = 1e-4 * 10f64.powf(i as f64 / 80.0);
        let c = ctrl.control(&[x])?;
        min_margin = min_margin.min(ctrl.margin(&[x], &c.control)?);
    }
    let estimates = exit_sweep(cfg, exec, &model, &spec, out)?;
    let oracle = brownian_exit_oracle(cfg.x0, cfg.sigma, cfg.horizon);
    out.digest.push(format!("smallest ZCBF margin over x in [1e-4, 1e1]: {min_margin:.3e}"));
    out.digest.push(format!("the controller is idle inside the set; Brownian oracle = {oracle:.5}"));
    out.details = json(&OracleDetails {
        oracle,
        abs_error: estimates.iter().map(|e| (e.p_hat - oracle).abs()).collect(),
        estimates,
        min_zcbf_margin_on_grid: Some(min_margin),
    });
    Ok(())
}

#[derive(Serialize)]
struct SweepDetails {
    estimates: Vec<ExitEstimate>,
    /// Exit fractions do not increase as the step shrinks.
    non_increasing_in_dt: bool,
}

fn safe_controller(cfg: &ResolvedConfig, exec: Execution, spec: ControllerSpec, out: &mut Output) -> Result<(), CliError> {
    let spec = with_bound(spec, cfg);
    out.digest.push(format!(
        "dx = u dt + {} dW from x0 = {}, {:?} controller with alpha3 = {:?}",
        cfg.sigma,
        cfg.x0,
        spec.kind,
        alpha3(cfg)
    ));
    let model = ScalarSde::single_integrator(cfg.sigma);
    let estimates = exit_sweep(cfg, exec, &model, &spec, out)?;
    let mut by_dt: Vec<&ExitEstimate> = estimates.iter().collect();
    by_dt.sort_by(|a, b| b.dt.total_cmp(&a.dt));
    let non_increasing = by_dt.windows(2).all(|w| w[1].p_hat <= w[0].p_hat);
    out.digest.push(format!("exit fraction non-increasing as dt shrinks: {non_increasing}"));
    out.details = json(&SweepDetails {
        estimates,
        non_increasing_in_dt: non_increasing,
    });
    Ok(())
}

#[derive(Serialize)]
struct DivergenceCell {
    gamma: f64,
    p: f64,
    classification: FellerClassification,
    estimate: ExitEstimate,
    /// Exit fraction above 5% for the hitting case, below 1% otherwise.
    consistent: bool,
}

pub fn case_label(case: Option<BoundaryCase>) -> &'static str {
    case.map_or("unknown", |c| c.as_str())
}

fn divergence_rate_sweep(cfg: &ResolvedConfig, exec: Execution, out: &mut Output) -> Result<(), CliError> {
    let sweep = cfg.sweep.as_ref().expect("resolved sweep");
    out.digest.push(format!(
        "uncontrolled h-SDE with mu/sigma^2 = gamma h^-p, sigma = {}, h0 = {}",
        cfg.sigma, cfg.x0
    ));
    let dt = cfg.dt.iter().copied().fold(f64::INFINITY, f64::min);
    let barrier = AffineBarrier::identity();
    let mut cells = Vec::new();
    for &p in &sweep.p {
        for &gamma in &sweep.gamma {
            let ratio = RatioSpec {
                gamma,
                p,
                sigma_lower_bounded: sweep.sigma_lower_bounded,
                c: sweep.c,
            };
            let classification = classify_boundary(&ratio)?;
            let model = ScalarSde::power_ratio(gamma, p, cfg.sigma);
            let est = estimate_exit_probability_with(
                &model,
                &ControllerSpec::none(),
                &barrier,
                &[cfg.x0],
                &exit_config(cfg, dt),
                exec,
            )?;
            let tag = case_label(classification.case_tag);
            let consistent = match classification.case_tag {
                Some(BoundaryCase::HitsZeroWithPositiveProb) => est.p_hat > 0.05,
                Some(_) => est.p_hat < 0.01,
                None => false,
            };
            out.rows.push(exit_row(cfg, format!("gamma={gamma}_p={p}"), &est, tag));
            out.digest.push(format!(
                "gamma = {gamma:<4} p = {p:<4} {tag:<30} p_hat = {:.4} [{:.4}, {:.4}] {}",
                est.p_hat,
                est.ci_low,
                est.ci_high,
                if consistent { "consistent" } else { "INCONSISTENT" }
            ));
            cells.push(DivergenceCell {
                gamma,
                p,
                classification,
                estimate: est,
                consistent,
            });
        }
    }
    out.details = json(&cells);
    Ok(())
}

#[derive(Serialize)]
struct StoppingCell {
    dt: f64,
    n_paths: u64,
    /// Paths on which both ζ₀ and η₁ occurred before the horizon.
    n_complete: u64,
    /// Median of η₁ − ζ₀ with missing crossings counted as +∞; `None` if infinite.
    median_gap: Option<f64>,
    median_gap_in_steps: Option<f64>,
    mean_gap_complete: Option<f64>,
    quantile_90_gap: Option<f64>,
}

fn median_of(sorted: &[f64], q: f64) -> Option<f64> {
    let idx = ((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len()) - 1;
    sorted.get(idx).copied().filter(|v| v.is_finite())
}

fn stopping_times(cfg: &ResolvedConfig, exec: Execution, out: &mut Output) -> Result<(), CliError> {
    let theta = cfg.theta.expect("resolved theta");
    let max_pairs = cfg.max_pairs.unwrap_or(2);
    out.digest.push(format!(
        "Brownian motion from x0 = {}, level theta = {theta}, gap eta_1 - zeta_0 of the crossing sequence",
        cfg.x0
    ));
    let model = ScalarSde::brownian(cfg.sigma);
    let free = Unconstrained { dim: 1 };
    let h = AffineBarrier::identity();
    let mut cells = Vec::new();
    for &dt in &cfg.dt {
        let gaps = map_paths(exec, cfg.n_paths, |i| -> Result<f64, CliError> {
            let icfg = IntegratorConfig::new(dt, cfg.horizon)
                .with_bridge(cfg.bridge_correction)
                .with_stream(cfg.seed, i);
            let path = simulate_path(&model, &ControllerSpec::none(), &free, &[cfg.x0], &icfg)?;
            let rec = stopping_time_sequence(&path, &h, theta, max_pairs);
            Ok(match (rec.zeta(0), rec.eta(1)) {
                (Some(z), Some(e)) => e - z,
                _ => f64::INFINITY,
            })
        });
        let mut gaps = gaps.into_iter().collect::<Result<Vec<f64>, _>>()?;
        gaps.sort_by(f64::total_cmp);
        let complete: Vec<f64> = gaps.iter().copied().filter(|g| g.is_finite()).collect();
        let median = median_of(&gaps, 0.5);
        let cell = StoppingCell {
            dt,
            n_paths: cfg.n_paths,
            n_complete: complete.len() as u64,
            median_gap: median,
            median_gap_in_steps: median.map(|m| m / dt),
            mean_gap_complete: (!complete.is_empty()).then(|| complete.iter().sum::<f64>() / complete.len() as f64),
            quantile_90_gap: median_of(&gaps, 0.9),
        };
        out.rows.push(plain_row(cfg, dt_label(dt), cfg.n_paths, dt));
        out.digest.push(format!(
            "{}: median gap = {} ({} steps), complete pairs {} / {}",
            dt_label(dt),
            median.map_or("inf".to_string(), |m| format!("{m:.3e}")),
            cell.median_gap_in_steps.map_or("inf".to_string(), |s| format!("{s:.1}")),
            cell.n_complete,
            cfg.n_paths
        ));
        cells.push(cell);
    }
    out.details = json(&cells);
    Ok(())
}

/// `E L_t^a` for `x0 + σW`: `E|X_t − a| − |x0 − a|`.
pub fn brownian_local_time_oracle(x0: f64, sigma: f64, t: f64, level: f64) -> f64 {
    let mu = x0 - level;
    let s = sigma * t.sqrt();
    if s == 0.0 {
        return 0.0;
    }
    let folded = s * (2.0 / std::f64::consts::PI).sqrt() * (-mu * mu / (2.0 * s * s)).exp()
        + mu * (1.0 - erfc(mu / (s * std::f64::consts::SQRT_2)));
    folded - mu.abs()
}

#[derive(Serialize)]
struct TanakaCell {
    dt: f64,
    eps: f64,
    n_paths: u64,
    mean_l_hat: f64,
    se_l_hat: f64,
    oracle: f64,
    rel_error: f64,
    mean_abs_residual: f64,
    n_noisy: u64,
}

fn tanaka_check(cfg: &ResolvedConfig, exec: Execution, out: &mut Output) -> Result<(), CliError> {
    let level = cfg.level.unwrap_or(0.0);
    out.digest.push(format!(
        "Brownian motion from x0 = {} with sigma = {}, local time at a = {level} over [0, {}]",
        cfg.x0, cfg.sigma, cfg.horizon
    ));
    let model = ScalarSde::brownian(cfg.sigma);
    let free = Unconstrained { dim: 1 };
    let oracle = brownian_local_time_oracle(cfg.x0, cfg.sigma, cfg.horizon, level);
    let mut cells = Vec::new();
    for &dt in &cfg.dt {
        let eps = cfg.eps.unwrap_or_else(|| default_bandwidth(cfg.sigma, dt));
        let qv = cfg.sigma * cfg.sigma;
        let per_path = map_paths(exec, cfg.n_paths, |i| -> Result<(f64, f64, bool), CliError> {
            let icfg = IntegratorConfig::new(dt, cfg.horizon).with_stream(cfg.seed, i);
            let path = simulate_path(&model, &ControllerSpec::none(), &free, &[cfg.x0], &icfg)?;
            let x = path.component(0);
            let rates = vec![qv; path.n_steps()];
            let est = estimate_local_time(&path.times, &x, &rates, level, eps)?;
            Ok((est.l_hat, est.tanaka_residual.abs(), est.noisy))
        });
        let (mut sum, mut sum_sq, mut res, mut noisy) = (0.0, 0.0, 0.0, 0u64);
        for r in per_path {
            let (l, r, n) = r?;
            sum += l;
            sum_sq += l * l;
            res += r;
            noisy += n as u64;
        }
        let n = cfg.n_paths as f64;
        let mean = sum / n;
        let var = if cfg.n_paths > 1 { (sum_sq - n * mean * mean) / (n - 1.0) } else { 0.0 };
        let cell = TanakaCell {
            dt,
            eps,
            n_paths: cfg.n_paths,
            mean_l_hat: mean,
            se_l_hat: (var.max(0.0) / n).sqrt(),
            oracle,
            rel_error: if oracle != 0.0 { (mean - oracle).abs() / oracle } else { mean.abs() },
            mean_abs_residual: res / n,
            n_noisy: noisy,
        };
        out.rows.push(plain_row(cfg, dt_label(dt), cfg.n_paths, dt));
        out.digest.push(format!(
            "{}: mean L_hat = {:.5} ± {:.5} (oracle {:.5}), mean |Tanaka residual| = {:.3e}",
            dt_label(dt),
            cell.mean_l_hat,
            cell.se_l_hat,
            oracle,
            cell.mean_abs_residual
        ));
        cells.push(cell);
    }
    out.details = json(&cells);
    Ok(())
}

#[derive(Serialize)]
struct BTildeDetails {
    report: BTildeReport,
    /// `δ/2 + 3` binomial standard errors.
    threshold: f64,
    within_threshold: bool,
}

fn b_tilde_bound(cfg: &ResolvedConfig, exec: Execution, out: &mut Output) -> Result<(), CliError> {
    let alpha = alpha3(cfg);
    let delta = cfg.delta.expect("resolved delta");
    out.digest.push(format!(
        "dx = u dt + {} dW from x0 = {}, RCBF controller with B = 1/x, alpha3 = {alpha:?}, delta = {delta}",
        cfg.sigma, cfg.x0
    ));
    let model = ScalarSde::single_integrator(cfg.sigma);
    let controller = with_bound(ControllerSpec::rcbf(alpha), cfg);
    let spec = ReciprocalSpec::inverse_of(Arc::new(AffineBarrier::identity()), alpha);
    let dt = cfg.dt.iter().copied().fold(f64::INFINITY, f64::min);
    let bcfg = BTildeConfig {
        n_pilot: cfg.n_pilot.unwrap_or(cfg.n_paths),
        n_main: cfg.n_paths,
        dt,
        horizon: cfg.horizon,
        seed: cfg.seed,
        bridge_correction: cfg.bridge_correction,
        delta,
        eps: cfg.eps,
    };
    let report = validate_b_tilde_bound(&model, &controller, &spec, &[cfg.x0], &bcfg, exec)?;
    let threshold = delta / 2.0 + 3.0 * report.standard_error;
    let (ci_low, ci_high) = wilson_interval(report.n_violations, report.n_main, 0.95)?;
    out.rows.push(SummaryRow {
        experiment: cfg.experiment.name().into(),
        cell_id: format!("delta={delta}"),
        n_paths: report.n_main,
        dt,
        horizon: cfg.horizon,
        n_exits: Some(report.n_violations),
        p_hat: Some(report.violation_fraction),
        ci_low: Some(ci_low),
        ci_high: Some(ci_high),
        classifier_tag: String::new(),
        seed: cfg.seed,
    });
    out.digest.push(format!(
        "M = {:.4}, b_tilde = {:.4}, violation fraction = {:.4} (threshold {threshold:.4}), largest drift excess on B < B0 = {:.3e}",
        report.m, report.b_tilde_rate, report.violation_fraction, report.max_drift_excess
    ));
    out.details = json(&BTildeDetails {
        within_threshold: report.violation_fraction <= threshold,
        report,
        threshold,
    });
    Ok(())
}
