//! Control-affine SDEs `dx = (f(x) + g(x) u) dt + σ(x) dW` and their
//! Euler–Maruyama simulation with exit detection against a barrier.

use std::io::{self, Write};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::barrier::{Barrier, ControllerSpec, ItoTerms};
use crate::error::{invalid, LabError, Result};
use crate::rng::{NoiseStream, StreamId};

/// A control-affine diffusion. Matrices are written row-major into the
/// provided buffers: `g` is `dim_x × dim_u`, `σ` is `dim_x × dim_w`.
///
/// Implementations are shared by all simulation workers and must be pure.
pub trait SdeModel: Send + Sync {
    fn dim_x(&self) -> usize;
    fn dim_u(&self) -> usize;
    fn dim_w(&self) -> usize;
    fn drift(&self, x: &[f64], out: &mut [f64]);
    fn control_matrix(&self, x: &[f64], out: &mut [f64]);
    fn diffusion(&self, x: &[f64], out: &mut [f64]);
}

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// One-dimensional model with scalar drift, control gain and noise intensity.
#[derive(Clone)]
pub struct ScalarSde {
    drift: ScalarFn,
    gain: ScalarFn,
    noise: ScalarFn,
}

impl ScalarSde {
    pub fn new(
        drift: impl Fn(f64) -> f64 + Send + Sync + 'static,
        gain: impl Fn(f64) -> f64 + Send + Sync + 'static,
        noise: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        ScalarSde {
            drift: Arc::new(drift),
            gain: Arc::new(gain),
            noise: Arc::new(noise),
        }
    }

    /// `dx = σ dW`.
    pub fn brownian(sigma: f64) -> Self {
        Self::new(|_| 0.0, |_| 0.0, move |_| sigma)
    }

    /// `dx = u dt + σ dW`.
    pub fn single_integrator(sigma: f64) -> Self {
        Self::new(|_| 0.0, |_| 1.0, move |_| sigma)
    }

    /// Uncontrolled `dx = γ σ² x^{-p} dt + σ dW`, i.e. a drift/diffusion
    /// ratio `μ/σ² = γ x^{-p}`.
    pub fn power_ratio(gamma: f64, p: f64, sigma: f64) -> Self {
        let scale = gamma * sigma * sigma;
        Self::new(move |x| scale * x.powf(-p), |_| 0.0, move |_| sigma)
    }
}

impl std::fmt::Debug for ScalarSde {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("ScalarSde")
    }
}

impl SdeModel for ScalarSde {
    fn dim_x(&self) -> usize {
        1
    }
    fn dim_u(&self) -> usize {
        1
    }
    fn dim_w(&self) -> usize {
        1
    }
    fn drift(&self, x: &[f64], out: &mut [f64]) {
        out[0] = (self.drift)(x[0]);
    }
    fn control_matrix(&self, x: &[f64], out: &mut [f64]) {
        out[0] = (self.gain)(x[0]);
    }
    fn diffusion(&self, x: &[f64], out: &mut [f64]) {
        out[0] = (self.noise)(x[0]);
    }
}

type VecFn = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;

/// Multi-dimensional model assembled from closures that fill row-major buffers.
#[derive(Clone)]
pub struct FnSde {
    dims: (usize, usize, usize),
    drift: VecFn,
    control: VecFn,
    diffusion: VecFn,
}

impl FnSde {
    pub fn new(
        dim_x: usize,
        dim_u: usize,
        dim_w: usize,
        drift: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
        control: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
        diffusion: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
    ) -> Self {
        FnSde {
            dims: (dim_x, dim_u, dim_w),
            drift: Arc::new(drift),
            control: Arc::new(control),
            diffusion: Arc::new(diffusion),
        }
    }
}

impl SdeModel for FnSde {
    fn dim_x(&self) -> usize {
        self.dims.0
    }
    fn dim_u(&self) -> usize {
        self.dims.1
    }
    fn dim_w(&self) -> usize {
        self.dims.2
    }
    fn drift(&self, x: &[f64], out: &mut [f64]) {
        (self.drift)(x, out)
    }
    fn control_matrix(&self, x: &[f64], out: &mut [f64]) {
        (self.control)(x, out)
    }
    fn diffusion(&self, x: &[f64], out: &mut [f64]) {
        (self.diffusion)(x, out)
    }
}

/// `f`, `g` and `σ` evaluated at one state.
#[derive(Debug, Clone)]
pub struct ModelEval {
    pub dim_x: usize,
    pub dim_u: usize,
    pub dim_w: usize,
    pub f: Vec<f64>,
    pub g: Vec<f64>,
    pub sigma: Vec<f64>,
}

impl ModelEval {
    pub fn for_model(model: &dyn SdeModel) -> Self {
        let (n, m, w) = (model.dim_x(), model.dim_u(), model.dim_w());
        ModelEval {
            dim_x: n,
            dim_u: m,
            dim_w: w,
            f: vec![0.0; n],
            g: vec![0.0; n * m],
            sigma: vec![0.0; n * w],
        }
    }

    pub fn evaluate(&mut self, model: &dyn SdeModel, x: &[f64]) -> Result<()> {
        model.drift(x, &mut self.f);
        model.control_matrix(x, &mut self.g);
        model.diffusion(x, &mut self.sigma);
        let finite = self
            .f
            .iter()
            .chain(&self.g)
            .chain(&self.sigma)
            .all(|v| v.is_finite());
        if finite {
            Ok(())
        } else {
            Err(LabError::ModelEvaluation { state: x.to_vec() })
        }
    }

    /// Writes `x + (f + g u) dt + σ dW` into `out`.
    pub fn advance(&self, x: &[f64], u: &[f64], dt: f64, dw: &[f64], out: &mut [f64]) {
        for i in 0..self.dim_x {
            let mut drift = self.f[i];
            let g_row = &self.g[i * self.dim_u..(i + 1) * self.dim_u];
            for (gij, uj) in g_row.iter().zip(u) {
                drift += gij * uj;
            }
            let s_row = &self.sigma[i * self.dim_w..(i + 1) * self.dim_w];
            let mut noise = 0.0;
            for (sik, dwk) in s_row.iter().zip(dw) {
                noise += sik * dwk;
            }
            out[i] = x[i] + drift * dt + noise;
        }
    }
}

fn check_len(what: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(LabError::Dimension {
            what,
            expected,
            found,
        })
    }
}

/// One Euler–Maruyama step `x + (f(x) + g(x)u)·dt + σ(x)·dW`.
pub fn em_step(model: &dyn SdeModel, x: &[f64], u: &[f64], dt: f64, dw: &[f64]) -> Result<Vec<f64>> {
    check_len("state", model.dim_x(), x.len())?;
    check_len("control", model.dim_u(), u.len())?;
    check_len("noise increment", model.dim_w(), dw.len())?;
    if !(dt > 0.0) {
        return Err(invalid(format!("time step must be positive, got {dt}")));
    }
    let mut eval = ModelEval::for_model(model);
    eval.evaluate(model, x)?;
    let mut out = vec![0.0; x.len()];
    eval.advance(x, u, dt, dw, &mut out);
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub dt: f64,
    pub horizon: f64,
    pub bridge_correction: bool,
    pub seed: u64,
    pub path_index: u64,
}

impl IntegratorConfig {
    pub fn new(dt: f64, horizon: f64) -> Self {
        IntegratorConfig {
            dt,
            horizon,
            bridge_correction: false,
            seed: 0,
            path_index: 0,
        }
    }

    pub fn with_bridge(mut self, on: bool) -> Self {
        self.bridge_correction = on;
        self
    }

    pub fn with_stream(mut self, seed: u64, path_index: u64) -> Self {
        self.seed = seed;
        self.path_index = path_index;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(invalid(format!("dt must be positive and finite, got {}", self.dt)));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(invalid(format!("horizon must be positive and finite, got {}", self.horizon)));
        }
        if self.dt > self.horizon {
            return Err(invalid(format!("dt {} exceeds horizon {}", self.dt, self.horizon)));
        }
        if self.horizon / self.dt > 1e12 {
            return Err(invalid("horizon/dt is too large"));
        }
        Ok(())
    }

    /// `ceil(horizon / dt)`, ignoring round-off in the ratio.
    pub fn n_steps(&self) -> u64 {
        let ratio = self.horizon / self.dt;
        let nearest = ratio.round();
        let n = if (ratio - nearest).abs() <= 1e-9 * ratio.max(1.0) {
            nearest
        } else {
            ratio.ceil()
        };
        (n as u64).max(1)
    }

    /// Grid time of step boundary `k`; the last boundary is exactly the horizon.
    pub fn time_at(&self, k: u64) -> f64 {
        if k >= self.n_steps() {
            self.horizon
        } else {
            k as f64 * self.dt
        }
    }
}

/// Result of the exit test on one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExitDecision {
    pub exit: bool,
    /// Probability that the continuous path left the safe set during the step.
    pub crossing_probability: f64,
}

/// Decides whether a step `h_prev → h_next` left the safe set.
///
/// With `bridge_correction`, a step that ends inside the set still counts as an
/// exit with the Brownian-bridge crossing probability
/// `exp(-2 h_prev h_next / (σ_eff² dt))`, compared against `u01`.
/// Probabilities below `e^{-37}` are reported as 0.
pub fn detect_exit(
    h_prev: f64,
    h_next: f64,
    dt: f64,
    sigma_eff: f64,
    bridge_correction: bool,
    u01: f64,
) -> ExitDecision {
    debug_assert!(h_prev > 0.0);
    if !(h_next > 0.0) {
        return ExitDecision {
            exit: true,
            crossing_probability: 1.0,
        };
    }
    if !bridge_correction || sigma_eff == 0.0 {
        return ExitDecision {
            exit: false,
            crossing_probability: 0.0,
        };
    }
    let exponent = -2.0 * h_prev * h_next / (sigma_eff * sigma_eff * dt);
    // e^{-37} is below the smallest uniform the noise stream produces.
    if exponent < -37.0 {
        return ExitDecision {
            exit: false,
            crossing_probability: 0.0,
        };
    }
    let p = exponent.exp();
    ExitDecision {
        exit: u01 < p,
        crossing_probability: p,
    }
}

/// How a simulated path ended.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PathEnd {
    Horizon,
    Exited { time: f64 },
    Infeasible { time: f64 },
}

/// A recorded trajectory. States, barrier values and barrier diffusions are
/// stored per grid point (flattened), controls and noise increments per step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathSample {
    pub dim_x: usize,
    pub dim_u: usize,
    pub dim_w: usize,
    pub times: Vec<f64>,
    pub states: Vec<f64>,
    pub controls: Vec<f64>,
    pub increments: Vec<f64>,
    pub barrier_values: Vec<f64>,
    /// `∂h/∂x σ(x)` at every grid point; NaN where it could not be evaluated.
    pub barrier_diffusion: Vec<f64>,
    pub exited: bool,
    pub exit_time: Option<f64>,
    pub infeasible_at: Option<f64>,
    pub stream: StreamId,
}

impl PathSample {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn n_steps(&self) -> usize {
        self.times.len().saturating_sub(1)
    }

    pub fn state(&self, k: usize) -> &[f64] {
        &self.states[k * self.dim_x..(k + 1) * self.dim_x]
    }

    pub fn control(&self, k: usize) -> &[f64] {
        &self.controls[k * self.dim_u..(k + 1) * self.dim_u]
    }

    pub fn increment(&self, k: usize) -> &[f64] {
        &self.increments[k * self.dim_w..(k + 1) * self.dim_w]
    }

    pub fn sigma_tilde(&self, k: usize) -> &[f64] {
        &self.barrier_diffusion[k * self.dim_w..(k + 1) * self.dim_w]
    }

    /// Squared norm of the barrier diffusion at grid point `k`.
    pub fn sigma_tilde_sq(&self, k: usize) -> f64 {
        self.sigma_tilde(k).iter().map(|s| s * s).sum()
    }

    /// Values of one state coordinate along the path.
    pub fn component(&self, i: usize) -> Vec<f64> {
        self.states.iter().skip(i).step_by(self.dim_x).copied().collect()
    }

    /// Dumps the path as CSV with columns `t, x_1..x_n, u_1..u_m, h`.
    /// The control columns of the final row are empty.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        let mut header = vec!["t".to_string()];
        header.extend((1..=self.dim_x).map(|i| format!("x_{i}")));
        header.extend((1..=self.dim_u).map(|j| format!("u_{j}")));
        header.push("h".into());
        writeln!(out, "{}", header.join(","))?;
        for k in 0..self.len() {
            let mut row = vec![self.times[k].to_string()];
            row.extend(self.state(k).iter().map(f64::to_string));
            if k < self.n_steps() {
                row.extend(self.control(k).iter().map(f64::to_string));
            } else {
                row.extend(std::iter::repeat_n(String::new(), self.dim_u));
            }
            row.push(self.barrier_values[k].to_string());
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Summary of a path without its trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathOutcome {
    pub end: PathEnd,
    pub steps: u64,
}

impl PathOutcome {
    pub fn exited(&self) -> bool {
        matches!(self.end, PathEnd::Exited { .. })
    }

    pub fn infeasible(&self) -> bool {
        matches!(self.end, PathEnd::Infeasible { .. })
    }
}

/// Receives the per-step data of the integrator.
trait Recorder {
    const WANTS_FINAL_DIFFUSION: bool;
    fn start(&mut self, _x0: &[f64], _h0: f64) {}
    #[allow(clippy::too_many_arguments)]
    fn step(&mut self, _t_next: f64, _sigma_tilde: &[f64], _u: &[f64], _dw: &[f64], _x_next: &[f64], _h_next: f64) {}
    fn finish(&mut self, _sigma_tilde_final: &[f64]) {}
}

struct Discard;

impl Recorder for Discard {
    const WANTS_FINAL_DIFFUSION: bool = false;
}

impl Recorder for PathSample {
    const WANTS_FINAL_DIFFUSION: bool = true;

    fn start(&mut self, x0: &[f64], h0: f64) {
        self.times.push(0.0);
        self.states.extend_from_slice(x0);
        self.barrier_values.push(h0);
    }

    fn step(&mut self, t_next: f64, sigma_tilde: &[f64], u: &[f64], dw: &[f64], x_next: &[f64], h_next: f64) {
        self.barrier_diffusion.extend_from_slice(sigma_tilde);
        self.controls.extend_from_slice(u);
        self.increments.extend_from_slice(dw);
        self.times.push(t_next);
        self.states.extend_from_slice(x_next);
        self.barrier_values.push(h_next);
    }

    fn finish(&mut self, sigma_tilde_final: &[f64]) {
        self.barrier_diffusion.extend_from_slice(sigma_tilde_final);
    }
}

/// Simulates one path and records the full trajectory.
pub fn simulate_path(
    model: &dyn SdeModel,
    controller: &ControllerSpec,
    barrier: &dyn Barrier,
    x0: &[f64],
    config: &IntegratorConfig,
) -> Result<PathSample> {
    let n = config.n_steps() as usize;
    let mut sample = PathSample {
        dim_x: model.dim_x(),
        dim_u: model.dim_u(),
        dim_w: model.dim_w(),
        times: Vec::with_capacity(n + 1),
        states: Vec::with_capacity((n + 1) * model.dim_x()),
        controls: Vec::with_capacity(n * model.dim_u()),
        increments: Vec::with_capacity(n * model.dim_w()),
        barrier_values: Vec::with_capacity(n + 1),
        barrier_diffusion: Vec::with_capacity((n + 1) * model.dim_w()),
        exited: false,
        exit_time: None,
        infeasible_at: None,
        stream: StreamId {
            seed: config.seed,
            path_index: config.path_index,
        },
    };
    let outcome = integrate(model, controller, barrier, x0, config, &mut sample)?;
    match outcome.end {
        PathEnd::Horizon => {}
        PathEnd::Exited { time } => {
            sample.exited = true;
            sample.exit_time = Some(time);
        }
        PathEnd::Infeasible { time } => sample.infeasible_at = Some(time),
    }
    Ok(sample)
}

/// Simulates one path keeping only how and when it ended.
pub fn simulate_outcome(
    model: &dyn SdeModel,
    controller: &ControllerSpec,
    barrier: &dyn Barrier,
    x0: &[f64],
    config: &IntegratorConfig,
) -> Result<PathOutcome> {
    integrate(model, controller, barrier, x0, config, &mut Discard)
}

fn integrate<R: Recorder>(
    model: &dyn SdeModel,
    spec: &ControllerSpec,
    barrier: &dyn Barrier,
    x0: &[f64],
    config: &IntegratorConfig,
    rec: &mut R,
) -> Result<PathOutcome> {
    config.validate()?;
    spec.validate()?;
    check_len("initial state", model.dim_x(), x0.len())?;
    check_len("barrier dimension", model.dim_x(), barrier.dim())?;
    let h0 = barrier.value(x0);
    if !(h0 > 0.0) {
        return Err(LabError::OutsideSafeSet { value: h0 });
    }

    let (dim_x, dim_u, dim_w) = (model.dim_x(), model.dim_u(), model.dim_w());
    let n = config.n_steps();
    let needs_hessian = spec.needs_hessian();
    let mut eval = ModelEval::for_model(model);
    let mut terms = ItoTerms::new(dim_x, dim_u, dim_w);
    let mut u = vec![0.0; dim_u];
    let mut z = vec![0.0; dim_w];
    let mut dw = vec![0.0; dim_w];
    let mut x = x0.to_vec();
    let mut x_next = vec![0.0; dim_x];
    let mut h = h0;
    let mut noise = NoiseStream::new(config.seed, config.path_index, dim_w);

    rec.start(x0, h0);
    for k in 0..n {
        let t = config.time_at(k);
        let t_next = config.time_at(k + 1);
        let dt = t_next - t;

        eval.evaluate(model, &x)?;
        terms.compute(barrier, &eval, &x, h, needs_hessian);
        if !spec.control_into(&terms, &mut u) {
            rec.finish(&terms.sigma_tilde);
            return Ok(PathOutcome {
                end: PathEnd::Infeasible { time: t },
                steps: k,
            });
        }

        let u01 = noise.next_step(&mut z);
        let sqrt_dt = dt.sqrt();
        for (d, zi) in dw.iter_mut().zip(&z) {
            *d = zi * sqrt_dt;
        }
        eval.advance(&x, &u, dt, &dw, &mut x_next);
        if x_next.iter().any(|v| !v.is_finite()) {
            return Err(LabError::ModelEvaluation { state: x.clone() });
        }
        let h_next = barrier.value(&x_next);
        rec.step(t_next, &terms.sigma_tilde, &u, &dw, &x_next, h_next);

        let sigma_eff = terms.sigma_tilde_sq().sqrt();
        let decision = detect_exit(h, h_next, dt, sigma_eff, config.bridge_correction, u01);
        std::mem::swap(&mut x, &mut x_next);
        h = h_next;
        if decision.exit {
            if R::WANTS_FINAL_DIFFUSION {
                final_diffusion(model, barrier, &x, &mut eval, &mut terms);
                rec.finish(&terms.sigma_tilde);
            }
            return Ok(PathOutcome {
                end: PathEnd::Exited { time: t_next },
                steps: k + 1,
            });
        }
    }
    if R::WANTS_FINAL_DIFFUSION {
        final_diffusion(model, barrier, &x, &mut eval, &mut terms);
        rec.finish(&terms.sigma_tilde);
    }
    Ok(PathOutcome {
        end: PathEnd::Horizon,
        steps: n,
    })
}

fn final_diffusion(model: &dyn SdeModel, barrier: &dyn Barrier, x: &[f64], eval: &mut ModelEval, terms: &mut ItoTerms) {
    let h = barrier.value(x);
    match eval.evaluate(model, x) {
        Ok(()) => terms.compute(barrier, eval, x, h, false),
        Err(_) => terms.sigma_tilde.iter_mut().for_each(|s| *s = f64::NAN),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::barrier::{AffineBarrier, ControllerSpec};

    #[test]
    fn em_step_examples() {
        let bm = ScalarSde::brownian(1.0);
        assert_eq!(em_step(&bm, &[1.0], &[0.0], 1.0, &[0.3]).unwrap(), vec![1.3]);
        let si = ScalarSde::single_integrator(1.0);
        let x = em_step(&si, &[1.0], &[2.0], 0.1, &[0.0]).unwrap();
        assert!((x[0] - 1.2).abs() < 1e-15);
        let decay = ScalarSde::new(|x| -x, |_| 0.0, |_| 0.0);
        let x = em_step(&decay, &[1.0], &[0.0], 0.01, &[0.0]).unwrap();
        assert!((x[0] - 0.99).abs() < 1e-15);
    }

    #[test]
    fn em_step_rejects_bad_input() {
        let bm = ScalarSde::brownian(1.0);
        assert!(matches!(
            em_step(&bm, &[1.0], &[0.0], 0.1, &[0.1, 0.2]),
            Err(LabError::Dimension { .. })
        ));
        assert!(em_step(&bm, &[1.0], &[0.0], 0.0, &[0.1]).is_err());
        let bad = ScalarSde::new(|x| 1.0 / x, |_| 0.0, |_| 1.0);
        assert_eq!(
            em_step(&bad, &[0.0], &[0.0], 0.1, &[0.0]),
            Err(LabError::ModelEvaluation { state: vec![0.0] })
        );
    }

    #[test]
    fn exit_decisions() {
        assert!(detect_exit(0.5, -0.1, 1e-3, 1.0, false, 0.5).exit);
        let far = detect_exit(2.0, 2.0, 1e-3, 1.0, true, 1e-300);
        assert!(!far.exit);
        assert_eq!(far.crossing_probability, 0.0);
        let near = detect_exit(0.01, 0.01, 1e-2, 1.0, true, 0.5);
        assert!((near.crossing_probability - (-0.02f64).exp()).abs() < 1e-15);
        assert!(near.exit);
        assert!(!detect_exit(0.01, 0.01, 1e-2, 1.0, true, 0.99).exit);
        assert!(!detect_exit(0.01, 0.01, 1e-2, 0.0, true, 0.0).exit);
        assert!(!detect_exit(0.01, 0.01, 1e-2, 1.0, false, 0.0).exit);
    }

    #[test]
    fn step_grid_handles_round_off() {
        assert_eq!(IntegratorConfig::new(1e-4, 1.0).n_steps(), 10_000);
        assert_eq!(IntegratorConfig::new(0.1, 1.0).n_steps(), 10);
        assert_eq!(IntegratorConfig::new(0.3, 1.0).n_steps(), 4);
        let c = IntegratorConfig::new(0.3, 1.0);
        assert_eq!(c.time_at(4), 1.0);
        assert!(IntegratorConfig::new(2.0, 1.0).validate().is_err());
    }

    #[test]
    fn frozen_dynamics_never_exit() {
        let model = ScalarSde::new(|_| 0.0, |_| 0.0, |_| 0.0);
        let cfg = IntegratorConfig::new(0.01, 1.0).with_bridge(true);
        let path = simulate_path(&model, &ControllerSpec::none(), &AffineBarrier::identity(), &[1.0], &cfg).unwrap();
        assert!(!path.exited);
        assert_eq!(path.len(), 101);
        assert!(path.states.iter().all(|&v| v == 1.0));
        assert_eq!(path.controls.len(), 100);
    }

    #[test]
    fn start_outside_is_an_error() {
        let cfg = IntegratorConfig::new(0.01, 1.0);
        let r = simulate_path(&ScalarSde::brownian(1.0), &ControllerSpec::none(), &AffineBarrier::identity(), &[0.0], &cfg);
        assert_eq!(r.unwrap_err(), LabError::OutsideSafeSet { value: 0.0 });
    }

    #[test]
    fn csv_dump_layout() {
        let model = ScalarSde::single_integrator(1.0);
        let cfg = IntegratorConfig::new(0.5, 1.0).with_stream(3, 0);
        let path = simulate_path(&model, &ControllerSpec::none(), &AffineBarrier::identity(), &[5.0], &cfg).unwrap();
        let mut buf = Vec::new();
        path.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "t,x_1,u_1,h");
        assert_eq!(lines.len(), 4);
        assert!(lines[1].starts_with("0,5,0,5"));
        assert!(lines[3].split(',').nth(2).unwrap().is_empty());
    }
}
