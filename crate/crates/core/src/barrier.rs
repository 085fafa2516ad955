//! Barrier functions, the Itô push-forward of `h`, the three barrier
//! conditions and min-norm controller synthesis.
//!
//! Every condition is affine in the control, so each controller reduces to a
//! single linear constraint `a·u ≥ b` solved in closed form.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, LabError, Result};
use crate::sde::{ModelEval, SdeModel};

/// A scalar function `h` defining the safe set `{h ≥ 0}`, with its gradient
/// and (row-major) Hessian.
pub trait Barrier: Send + Sync {
    fn dim(&self) -> usize;
    fn value(&self, x: &[f64]) -> f64;
    fn gradient(&self, x: &[f64], out: &mut [f64]);
    fn hessian(&self, x: &[f64], out: &mut [f64]);
}

/// `h(x) = w·x + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineBarrier {
    pub weights: Vec<f64>,
    pub offset: f64,
}

impl AffineBarrier {
    /// Scalar `h(x) = x`.
    pub fn identity() -> Self {
        AffineBarrier {
            weights: vec![1.0],
            offset: 0.0,
        }
    }

    /// `h(x) = x_i` in `dim` dimensions.
    pub fn coordinate(dim: usize, i: usize) -> Self {
        let mut weights = vec![0.0; dim];
        weights[i] = 1.0;
        AffineBarrier { weights, offset: 0.0 }
    }
}

impl Barrier for AffineBarrier {
    fn dim(&self) -> usize {
        self.weights.len()
    }
    fn value(&self, x: &[f64]) -> f64 {
        self.weights.iter().zip(x).map(|(w, xi)| w * xi).sum::<f64>() + self.offset
    }
    fn gradient(&self, _x: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&self.weights);
    }
    fn hessian(&self, _x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
    }
}

/// `h(x) = r² − ‖x − c‖²`, the interior of a ball.
#[derive(Debug, Clone, PartialEq)]
pub struct BallBarrier {
    pub center: Vec<f64>,
    pub radius: f64,
}

impl Barrier for BallBarrier {
    fn dim(&self) -> usize {
        self.center.len()
    }
    fn value(&self, x: &[f64]) -> f64 {
        let d2: f64 = x.iter().zip(&self.center).map(|(a, c)| (a - c) * (a - c)).sum();
        self.radius * self.radius - d2
    }
    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        for ((o, a), c) in out.iter_mut().zip(x).zip(&self.center) {
            *o = -2.0 * (a - c);
        }
    }
    fn hessian(&self, _x: &[f64], out: &mut [f64]) {
        let n = self.dim();
        out.fill(0.0);
        for i in 0..n {
            out[i * n + i] = -2.0;
        }
    }
}

/// No constraint: `h ≡ 1`. Paths under this barrier never exit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Unconstrained {
    pub dim: usize,
}

impl Barrier for Unconstrained {
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, _x: &[f64]) -> f64 {
        1.0
    }
    fn gradient(&self, _x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
    }
    fn hessian(&self, _x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
    }
}

type ValueFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
type FillFn = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;

/// Barrier assembled from closures.
#[derive(Clone)]
pub struct FnBarrier {
    dim: usize,
    value: ValueFn,
    gradient: FillFn,
    hessian: FillFn,
}

impl FnBarrier {
    pub fn new(
        dim: usize,
        value: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        gradient: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
        hessian: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
    ) -> Self {
        FnBarrier {
            dim,
            value: Arc::new(value),
            gradient: Arc::new(gradient),
            hessian: Arc::new(hessian),
        }
    }

    /// Scalar barrier from `h`, `h'` and `h''`.
    pub fn scalar(
        h: impl Fn(f64) -> f64 + Send + Sync + 'static,
        dh: impl Fn(f64) -> f64 + Send + Sync + 'static,
        d2h: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        FnBarrier::new(1, move |x| h(x[0]), move |x, o| o[0] = dh(x[0]), move |x, o| o[0] = d2h(x[0]))
    }
}

impl Barrier for FnBarrier {
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, x: &[f64]) -> f64 {
        (self.value)(x)
    }
    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        (self.gradient)(x, out)
    }
    fn hessian(&self, x: &[f64], out: &mut [f64]) {
        (self.hessian)(x, out)
    }
}

/// Class-κ function: linear `k·s` or power `k·s^r`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum AlphaFn {
    Linear { k: f64 },
    Power { k: f64, r: f64 },
}

impl AlphaFn {
    pub const FAMILIES: [&'static str; 2] = ["linear", "power"];

    pub fn identity() -> Self {
        AlphaFn::Linear { k: 1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            AlphaFn::Linear { k } => k > 0.0 && k.is_finite(),
            AlphaFn::Power { k, r } => k > 0.0 && r > 0.0 && k.is_finite() && r.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(invalid(format!("class-κ parameters must be positive: {self:?}")))
        }
    }

    /// Evaluates on `s ≥ 0`.
    pub fn eval(&self, s: f64) -> f64 {
        match *self {
            AlphaFn::Linear { k } => k * s,
            AlphaFn::Power { k, r } => k * s.powf(r),
        }
    }

    pub fn inverse(&self, y: f64) -> f64 {
        match *self {
            AlphaFn::Linear { k } => y / k,
            AlphaFn::Power { k, r } => (y / k).powf(1.0 / r),
        }
    }
}

/// Reciprocal barrier `B = 1/h` with its class-κ bounds and decay function.
#[derive(Clone)]
pub struct ReciprocalSpec {
    pub barrier: Arc<dyn Barrier>,
    pub alpha1: AlphaFn,
    pub alpha2: AlphaFn,
    pub alpha3: AlphaFn,
}

impl ReciprocalSpec {
    /// `B = 1/h` with `α₁ = α₂ = id`, which satisfies the sandwich bounds exactly.
    pub fn inverse_of(barrier: Arc<dyn Barrier>, alpha3: AlphaFn) -> Self {
        ReciprocalSpec {
            barrier,
            alpha1: AlphaFn::identity(),
            alpha2: AlphaFn::identity(),
            alpha3,
        }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        1.0 / self.barrier.value(x)
    }

    /// `1/α₁(h(x)) ≤ B(x) ≤ 1/α₂(h(x))`, with a relative tolerance.
    pub fn bounds_hold(&self, x: &[f64], rel_tol: f64) -> bool {
        let h = self.barrier.value(x);
        if h <= 0.0 {
            return false;
        }
        let b = 1.0 / h;
        let lower = 1.0 / self.alpha1.eval(h);
        let upper = 1.0 / self.alpha2.eval(h);
        b >= lower * (1.0 - rel_tol) && b <= upper * (1.0 + rel_tol)
    }

    /// `α₃(α₂⁻¹(1/B₀))`, the drift bound of `B` on `{B ≥ B₀}`.
    pub fn drift_bound(&self, b0: f64) -> f64 {
        self.alpha3.eval(self.alpha2.inverse(1.0 / b0))
    }
}

/// The drift and diffusion of `h(x_t)` at one state, split into the part that
/// does not depend on the control and the control gain.
///
/// `μ̃(u) = drift_free + control_gain·u`, `σ̃ = ∂h/∂x σ`.
#[derive(Debug, Clone, PartialEq)]
pub struct ItoTerms {
    pub h: f64,
    /// `∂h/∂x f + ½ Tr(σᵀ ∂²h/∂x² σ)`.
    pub drift_free: f64,
    /// `∂h/∂x g`.
    pub control_gain: Vec<f64>,
    pub sigma_tilde: Vec<f64>,
    grad: Vec<f64>,
    hess: Vec<f64>,
}

impl ItoTerms {
    pub fn new(dim_x: usize, dim_u: usize, dim_w: usize) -> Self {
        ItoTerms {
            h: 0.0,
            drift_free: 0.0,
            control_gain: vec![0.0; dim_u],
            sigma_tilde: vec![0.0; dim_w],
            grad: vec![0.0; dim_x],
            hess: vec![0.0; dim_x * dim_x],
        }
    }

    /// Fills the terms at `x`. Without `with_hessian` the trace term is left out
    /// of `drift_free`; only `sigma_tilde` and `control_gain` are then exact.
    pub fn compute(&mut self, barrier: &dyn Barrier, eval: &ModelEval, x: &[f64], h: f64, with_hessian: bool) {
        let (n, m, w) = (eval.dim_x, eval.dim_u, eval.dim_w);
        self.h = h;
        barrier.gradient(x, &mut self.grad);
        let mut lf = 0.0;
        for i in 0..n {
            lf += self.grad[i] * eval.f[i];
        }
        for j in 0..m {
            self.control_gain[j] = (0..n).map(|i| self.grad[i] * eval.g[i * m + j]).sum();
        }
        for k in 0..w {
            self.sigma_tilde[k] = (0..n).map(|i| self.grad[i] * eval.sigma[i * w + k]).sum();
        }
        let mut half_trace = 0.0;
        if with_hessian {
            barrier.hessian(x, &mut self.hess);
            for k in 0..w {
                for i in 0..n {
                    let si = eval.sigma[i * w + k];
                    if si == 0.0 {
                        continue;
                    }
                    for j in 0..n {
                        half_trace += si * self.hess[i * n + j] * eval.sigma[j * w + k];
                    }
                }
            }
            half_trace *= 0.5;
        }
        self.drift_free = lf + half_trace;
    }

    pub fn mu_tilde(&self, u: &[f64]) -> f64 {
        self.drift_free + dot(&self.control_gain, u)
    }

    pub fn sigma_tilde_sq(&self) -> f64 {
        dot(&self.sigma_tilde, &self.sigma_tilde)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn terms_at(barrier: &dyn Barrier, model: &dyn SdeModel, x: &[f64]) -> Result<ItoTerms> {
    if barrier.dim() != model.dim_x() || x.len() != model.dim_x() {
        return Err(LabError::Dimension {
            what: "state",
            expected: model.dim_x(),
            found: x.len().min(barrier.dim()),
        });
    }
    let mut eval = ModelEval::for_model(model);
    eval.evaluate(model, x)?;
    let mut terms = ItoTerms::new(model.dim_x(), model.dim_u(), model.dim_w());
    terms.compute(barrier, &eval, x, barrier.value(x), true);
    Ok(terms)
}

fn interior_terms(barrier: &dyn Barrier, model: &dyn SdeModel, x: &[f64]) -> Result<ItoTerms> {
    let terms = terms_at(barrier, model, x)?;
    if terms.h > 0.0 {
        Ok(terms)
    } else {
        Err(LabError::OutsideSafeSet { value: terms.h })
    }
}

/// Drift `μ̃` and diffusion row `σ̃` of `h(x_t)` at `(x, u)`.
pub fn ito_push(barrier: &dyn Barrier, model: &dyn SdeModel, x: &[f64], u: &[f64]) -> Result<(f64, Vec<f64>)> {
    let terms = terms_at(barrier, model, x)?;
    if u.len() != model.dim_u() {
        return Err(LabError::Dimension {
            what: "control",
            expected: model.dim_u(),
            found: u.len(),
        });
    }
    Ok((terms.mu_tilde(u), terms.sigma_tilde))
}

/// `μ̃ + h`; the zero-CBF condition holds iff this is non-negative.
pub fn zcbf_margin(barrier: &dyn Barrier, model: &dyn SdeModel, x: &[f64], u: &[f64]) -> Result<f64> {
    let t = interior_terms(barrier, model, x)?;
    Ok(t.mu_tilde(u) + t.h)
}

/// `μ̃ − σ̃²/h + h² α₃(h)`.
pub fn modified_zcbf_margin(barrier: &dyn Barrier, model: &dyn SdeModel, x: &[f64], u: &[f64], alpha3: &AlphaFn) -> Result<f64> {
    let t = interior_terms(barrier, model, x)?;
    Ok(t.mu_tilde(u) - t.sigma_tilde_sq() / t.h + t.h * t.h * alpha3.eval(t.h))
}

/// `α₃(h) − (drift of B = 1/h)`.
pub fn rcbf_margin(spec: &ReciprocalSpec, model: &dyn SdeModel, x: &[f64], u: &[f64]) -> Result<f64> {
    let t = interior_terms(spec.barrier.as_ref(), model, x)?;
    let b_drift = reciprocal_drift(t.h, t.mu_tilde(u), t.sigma_tilde_sq())?;
    Ok(spec.alpha3.eval(t.h) - b_drift)
}

/// Drift of `B = 1/h` from the drift and squared diffusion of `h`:
/// `−h⁻² μ̃ + h⁻³ σ̃²`.
pub fn reciprocal_drift(h: f64, mu_tilde: f64, sigma_tilde_sq: f64) -> Result<f64> {
    if !(h > 0.0) {
        return Err(LabError::OutsideSafeSet { value: h });
    }
    let inv = 1.0 / h;
    Ok(-inv * inv * mu_tilde + inv * inv * inv * sigma_tilde_sq)
}

/// Outcome of min-norm synthesis.
#[derive(Debug, Clone, PartialEq)]
pub enum MinNormControl {
    Feasible(Vec<f64>),
    Infeasible,
}

/// Smallest-norm `u` with `a·u ≥ b`, optionally within `|u_i| ≤ u_max`.
pub fn min_norm_control(a: &[f64], b: f64, u_max: Option<f64>) -> MinNormControl {
    let mut u = vec![0.0; a.len()];
    if min_norm_into(a, b, u_max, &mut u) {
        MinNormControl::Feasible(u)
    } else {
        MinNormControl::Infeasible
    }
}

fn min_norm_into(a: &[f64], b: f64, u_max: Option<f64>, out: &mut [f64]) -> bool {
    out.fill(0.0);
    if b <= 0.0 {
        return true;
    }
    let norm_sq = dot(a, a);
    if norm_sq == 0.0 || !b.is_finite() {
        return false;
    }
    let scale = b / norm_sq;
    for (o, ai) in out.iter_mut().zip(a) {
        *o = scale * ai;
    }
    let Some(m) = u_max else {
        return true;
    };
    if out.iter().all(|v| v.abs() <= m) {
        return true;
    }
    // With the box active the minimiser is u_i = clamp(λ a_i, −m, m) for the
    // smallest λ reaching a·u = b; the attainable maximum is m‖a‖₁.
    let reach = |lambda: f64| -> f64 { a.iter().map(|ai| ai.abs() * (lambda * ai.abs()).min(m)).sum() };
    if m * a.iter().map(|v| v.abs()).sum::<f64>() < b {
        out.fill(0.0);
        return false;
    }
    let mut breaks: Vec<f64> = a.iter().filter(|v| **v != 0.0).map(|v| m / v.abs()).collect();
    breaks.sort_by(|x, y| x.total_cmp(y));
    let mut lo = 0.0;
    let mut lambda = *breaks.last().unwrap();
    for &bp in &breaks {
        if reach(bp) >= b {
            // reach is linear on [lo, bp]
            let (r_lo, r_bp) = (reach(lo), reach(bp));
            lambda = lo + (b - r_lo) * (bp - lo) / (r_bp - r_lo);
            break;
        }
        lo = bp;
    }
    for (o, ai) in out.iter_mut().zip(a) {
        *o = (lambda * ai).clamp(-m, m);
    }
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControllerKind {
    None,
    Zcbf,
    ModifiedZcbf,
    Rcbf,
}

impl ControllerKind {
    pub const NAMES: [&'static str; 4] = ["none", "zcbf", "modified_zcbf", "rcbf"];

    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "none" => Some(Self::None),
            "zcbf" => Some(Self::Zcbf),
            "modified_zcbf" => Some(Self::ModifiedZcbf),
            "rcbf" => Some(Self::Rcbf),
            _ => None,
        }
    }
}

/// Which barrier condition drives min-norm synthesis. For `rcbf` the
/// reciprocal barrier is `B = 1/h`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControllerSpec {
    pub kind: ControllerKind,
    pub alpha3: Option<AlphaFn>,
    pub u_max: Option<f64>,
}

impl ControllerSpec {
    pub fn none() -> Self {
        ControllerSpec {
            kind: ControllerKind::None,
            alpha3: None,
            u_max: None,
        }
    }

    pub fn zcbf() -> Self {
        ControllerSpec {
            kind: ControllerKind::Zcbf,
            ..Self::none()
        }
    }

    pub fn modified_zcbf(alpha3: AlphaFn) -> Self {
        ControllerSpec {
            kind: ControllerKind::ModifiedZcbf,
            alpha3: Some(alpha3),
            u_max: None,
        }
    }

    pub fn rcbf(alpha3: AlphaFn) -> Self {
        ControllerSpec {
            kind: ControllerKind::Rcbf,
            alpha3: Some(alpha3),
            u_max: None,
        }
    }

    pub fn with_bound(mut self, u_max: f64) -> Self {
        self.u_max = Some(u_max);
        self
    }

    pub fn validate(&self) -> Result<()> {
        match (self.kind, self.alpha3) {
            (ControllerKind::ModifiedZcbf | ControllerKind::Rcbf, None) => {
                return Err(invalid(format!("{:?} controller needs an alpha3 function", self.kind)))
            }
            (_, Some(a)) => a.validate()?,
            _ => {}
        }
        if let Some(m) = self.u_max {
            if !(m > 0.0) {
                return Err(invalid(format!("control bound must be positive, got {m}")));
            }
        }
        Ok(())
    }

    pub(crate) fn needs_hessian(&self) -> bool {
        self.kind != ControllerKind::None
    }

    /// The constraint `a·u ≥ b` of the selected condition; `None` for `kind = none`.
    pub fn constraint(&self, terms: &ItoTerms) -> Option<(Vec<f64>, f64)> {
        let mut a = vec![0.0; terms.control_gain.len()];
        self.constraint_into(terms, &mut a).map(|b| (a, b))
    }

    fn constraint_into(&self, t: &ItoTerms, a: &mut [f64]) -> Option<f64> {
        let h = t.h;
        let alpha3 = |s: f64| self.alpha3.map_or(0.0, |f| f.eval(s));
        match self.kind {
            ControllerKind::None => None,
            ControllerKind::Zcbf => {
                a.copy_from_slice(&t.control_gain);
                Some(-(t.drift_free + h))
            }
            ControllerKind::ModifiedZcbf => {
                a.copy_from_slice(&t.control_gain);
                Some(-(t.drift_free - t.sigma_tilde_sq() / h + h * h * alpha3(h)))
            }
            ControllerKind::Rcbf => {
                // α₃(h) − (−h⁻²(drift_free + gain·u) + h⁻³σ̃²) ≥ 0
                let inv2 = 1.0 / (h * h);
                for (ai, gi) in a.iter_mut().zip(&t.control_gain) {
                    *ai = inv2 * gi;
                }
                Some(-(alpha3(h) + inv2 * t.drift_free - inv2 * t.sigma_tilde_sq() / h))
            }
        }
    }

    /// Writes the control for `terms` into `out`; returns false when infeasible.
    pub(crate) fn control_into(&self, terms: &ItoTerms, out: &mut [f64]) -> bool {
        if self.kind == ControllerKind::None {
            out.fill(0.0);
            return true;
        }
        let mut stack = [0.0; 8];
        let mut heap = Vec::new();
        let a = if out.len() <= stack.len() {
            &mut stack[..out.len()]
        } else {
            heap.resize(out.len(), 0.0);
            &mut heap[..]
        };
        let b = self.constraint_into(terms, a).expect("kind is not none");
        min_norm_into(a, b, self.u_max, out)
    }
}

/// Control and whether the selected condition could be met.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlOutcome {
    pub control: Vec<f64>,
    pub feasible: bool,
}

/// A controller bound to its barrier and model.
pub struct BoundController<'a> {
    spec: ControllerSpec,
    barrier: &'a dyn Barrier,
    model: &'a dyn SdeModel,
}

pub fn make_controller<'a>(spec: ControllerSpec, barrier: &'a dyn Barrier, model: &'a dyn SdeModel) -> Result<BoundController<'a>> {
    spec.validate()?;
    if barrier.dim() != model.dim_x() {
        return Err(LabError::Dimension {
            what: "barrier dimension",
            expected: model.dim_x(),
            found: barrier.dim(),
        });
    }
    Ok(BoundController { spec, barrier, model })
}

impl BoundController<'_> {
    pub fn spec(&self) -> &ControllerSpec {
        &self.spec
    }

    pub fn control(&self, x: &[f64]) -> Result<ControlOutcome> {
        let terms = interior_terms(self.barrier, self.model, x)?;
        let mut control = vec![0.0; self.model.dim_u()];
        let feasible = self.spec.control_into(&terms, &mut control);
        Ok(ControlOutcome { control, feasible })
    }

    /// Margin of the controller's own condition at `(x, u)`.
    pub fn margin(&self, x: &[f64], u: &[f64]) -> Result<f64> {
        let alpha3 = self.spec.alpha3.unwrap_or(AlphaFn::identity());
        match self.spec.kind {
            ControllerKind::None => Ok(f64::INFINITY),
            ControllerKind::Zcbf => zcbf_margin(self.barrier, self.model, x, u),
            ControllerKind::ModifiedZcbf => modified_zcbf_margin(self.barrier, self.model, x, u, &alpha3),
            ControllerKind::Rcbf => {
                let t = interior_terms(self.barrier, self.model, x)?;
                Ok(alpha3.eval(t.h) - reciprocal_drift(t.h, t.mu_tilde(u), t.sigma_tilde_sq())?)
            }
        }
    }
}
