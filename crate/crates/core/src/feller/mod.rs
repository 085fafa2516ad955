//! Feller boundary classification at 0 for scalar diffusions whose
//! drift/diffusion ratio follows the power law `μ/σ² = γ h^{-p}`.
//!
//! The scale function is `s(x) = ∫_c^x exp(−2∫_c^y μ(z)/σ²(z) dz) dy`. The
//! ratio inside is `μ/σ²`, the standard Feller scale density; some printings
//! of the definition show `μ/σ`, which is inconsistent with the power-law
//! computation that follows it.

mod gamma;
pub mod quadrature;

use serde::{Deserialize, Serialize, Serializer};

use crate::error::{invalid, Result};
pub use gamma::{lower_incomplete_gamma, upper_incomplete_gamma};
use quadrature::{integrate_geometric, integrate_to_infinity, integrate_to_zero, Improper, Tolerance};

/// Power-law ratio `μ/σ² = γ h^{-p}` with reference point `c` of the scale
/// function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioSpec {
    pub gamma: f64,
    pub p: f64,
    pub sigma_lower_bounded: bool,
    pub c: f64,
}

impl RatioSpec {
    pub fn new(gamma: f64, p: f64) -> Self {
        RatioSpec {
            gamma,
            p,
            sigma_lower_bounded: true,
            c: 1.0,
        }
    }

    pub fn with_c(mut self, c: f64) -> Self {
        self.c = c;
        self
    }

    pub fn with_sigma_lower_bounded(mut self, bounded: bool) -> Self {
        self.sigma_lower_bounded = bounded;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(invalid(format!("gamma must be non-negative, got {}", self.gamma)));
        }
        if !(self.p >= 0.0 && self.p.is_finite()) {
            return Err(invalid(format!("p must be non-negative, got {}", self.p)));
        }
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(invalid(format!("c must be positive, got {}", self.c)));
        }
        Ok(())
    }

    /// `η(y) = ∫_c^y γ z^{-p} dz`.
    pub fn eta(&self, y: f64) -> f64 {
        if self.gamma == 0.0 {
            return 0.0;
        }
        if self.p == 1.0 {
            self.gamma * (y / self.c).ln()
        } else {
            let q = 1.0 - self.p;
            self.gamma / q * (y.powf(q) - self.c.powf(q))
        }
    }

    /// Scale density `s'(y) = exp(−2η(y))`.
    pub fn scale_density(&self, y: f64) -> f64 {
        if self.p == 1.0 && self.gamma != 0.0 {
            return (y / self.c).powf(-2.0 * self.gamma);
        }
        (-2.0 * self.eta(y)).exp()
    }
}

const SCALE_TOL: Tolerance = Tolerance {
    abs: 1e-15,
    rel: 1e-13,
    max_intervals: 4000,
};

fn check_point(x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("scale and speed functions need 0 < x < ∞, got {x}")))
    }
}

/// `s(x)` by adaptive quadrature of the scale density.
///
/// Returns `±∞` when the density itself overflows on the way to `x`.
pub fn scale_function_numeric(spec: &RatioSpec, x: f64) -> Result<f64> {
    spec.validate()?;
    check_point(x)?;
    if x == spec.c {
        return Ok(0.0);
    }
    // s' is monotone, so its largest value over [x, c] sits at an endpoint.
    let log_peak = (-2.0 * spec.eta(x)).max(-2.0 * spec.eta(spec.c));
    if log_peak > 700.0 {
        return Ok(if x < spec.c { f64::NEG_INFINITY } else { f64::INFINITY });
    }
    integrate_geometric(|y| spec.scale_density(y), spec.c, x, SCALE_TOL).map(|r| r.value)
}

/// `s(x)` for an arbitrary ratio `μ/σ²`, with the inner integral also done by
/// quadrature.
pub fn scale_function_nested(ratio: &dyn Fn(f64) -> f64, c: f64, x: f64) -> Result<f64> {
    check_point(x)?;
    check_point(c)?;
    let inner_tol = Tolerance {
        abs: 1e-15,
        rel: 1e-13,
        max_intervals: 2000,
    };
    let mut failure = None;
    let outer = integrate_geometric(
        |y| match integrate_geometric(ratio, c, y, inner_tol) {
            Ok(r) => (-2.0 * r.value).exp(),
            Err(e) => {
                failure.get_or_insert(e);
                f64::NAN
            }
        },
        c,
        x,
        Tolerance {
            abs: 1e-14,
            rel: 1e-11,
            max_intervals: 2000,
        },
    );
    if let Some(e) = failure {
        return Err(e);
    }
    outer.map(|r| r.value)
}

/// Closed-form `s(x)` where one exists: `γ = 0`, `p = 1` (elementary) and
/// `p < 1` (incomplete gamma). `None` for `p > 1`.
pub fn scale_function_closed_form(spec: &RatioSpec, x: f64) -> Result<Option<f64>> {
    spec.validate()?;
    check_point(x)?;
    let (g, c) = (spec.gamma, spec.c);
    if g == 0.0 {
        return Ok(Some(x - c));
    }
    if spec.p == 1.0 {
        if g == 0.5 {
            return Ok(Some(c * (x / c).ln()));
        }
        return Ok(Some((c - c.powf(2.0 * g) * x.powf(1.0 - 2.0 * g)) / (2.0 * g - 1.0)));
    }
    if spec.p > 1.0 {
        return Ok(None);
    }
    let (a, k, nu_c, d) = gamma_form(spec);
    let nu_x = k * x.powf(1.0 - spec.p);
    Ok(Some(d * (upper_incomplete_gamma(a, nu_c)? - upper_incomplete_gamma(a, nu_x)?)))
}

/// For `p < 1`: `s(x) = d (Γ(1/q, ν(c)) − Γ(1/q, ν(x)))` with `q = 1 − p`,
/// `ν(x) = (2γ/q) x^q` and `d = q⁻¹ e^{ν(c)} (2γ/q)^{−1/q}`.
/// Returns `(1/q, 2γ/q, ν(c), d)`.
fn gamma_form(spec: &RatioSpec) -> (f64, f64, f64, f64) {
    let q = 1.0 - spec.p;
    let k = 2.0 * spec.gamma / q;
    let a = 1.0 / q;
    let nu_c = k * spec.c.powf(q);
    let d = a * nu_c.exp() * k.powf(-a);
    (a, k, nu_c, d)
}

/// A real number or one of the two infinities.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
pub enum Extended {
    NegInfinity,
    Finite(f64),
    PosInfinity,
}

impl Extended {
    pub fn is_finite(&self) -> bool {
        matches!(self, Extended::Finite(_))
    }

    pub fn from_improper(v: Improper, sign: f64) -> Self {
        match v {
            Improper::Finite(x) => Extended::Finite(sign * x),
            Improper::Divergent if sign < 0.0 => Extended::NegInfinity,
            Improper::Divergent => Extended::PosInfinity,
        }
    }
}

impl std::fmt::Display for Extended {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Extended::NegInfinity => f.write_str("-inf"),
            Extended::Finite(v) => write!(f, "{v}"),
            Extended::PosInfinity => f.write_str("+inf"),
        }
    }
}

/// Finite values serialise as numbers, infinities as `"-inf"` / `"+inf"`.
impl Serialize for Extended {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Extended::Finite(v) => s.serialize_f64(*v),
            other => s.serialize_str(&other.to_string()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScaleLimits {
    pub at_zero: Extended,
    pub at_inf: Extended,
}

/// `s(0+)` and `s(∞)` from the closed forms.
pub fn scale_limits(spec: &RatioSpec) -> Result<ScaleLimits> {
    use Extended::*;
    spec.validate()?;
    let (g, c) = (spec.gamma, spec.c);
    let limits = if g == 0.0 {
        (Finite(-c), PosInfinity)
    } else if spec.p == 1.0 {
        if g > 0.5 {
            (NegInfinity, Finite(c / (2.0 * g - 1.0)))
        } else if g == 0.5 {
            (NegInfinity, PosInfinity)
        } else {
            (Finite(c / (2.0 * g - 1.0)), PosInfinity)
        }
    } else if spec.p < 1.0 {
        let (a, _, nu_c, d) = gamma_form(spec);
        (Finite(-d * lower_incomplete_gamma(a, nu_c)?), Finite(d * upper_incomplete_gamma(a, nu_c)?))
    } else {
        (NegInfinity, PosInfinity)
    };
    Ok(ScaleLimits {
        at_zero: limits.0,
        at_inf: limits.1,
    })
}

/// `s(0+)` and `s(∞)` by improper quadrature of the scale density.
pub fn scale_limits_numeric(spec: &RatioSpec) -> Result<ScaleLimits> {
    spec.validate()?;
    let tol = Tolerance {
        abs: 1e-300,
        rel: 1e-12,
        max_intervals: 2000,
    };
    let density = |y: f64| spec.scale_density(y);
    let zero = integrate_to_zero(density, spec.c, tol)?;
    let inf = integrate_to_infinity(density, spec.c, tol)?;
    Ok(ScaleLimits {
        at_zero: Extended::from_improper(zero, -1.0),
        at_inf: Extended::from_improper(inf, 1.0),
    })
}

/// `s(1e-6)` and `s(1e6)`, the probe points used to sanity-check the limits.
pub fn probe_scale(spec: &RatioSpec) -> Result<(f64, f64)> {
    Ok((scale_function_numeric(spec, 1e-6)?, scale_function_numeric(spec, 1e6)?))
}

/// Speed function `v(x) = ∫_c^x s'(y) ∫_c^y 2 / (s'(z) σ²(z)) dz dy` by nested
/// quadrature, for a diffusion coefficient `sigma_profile`.
pub fn speed_function_numeric(spec: &RatioSpec, sigma_profile: &dyn Fn(f64) -> f64, x: f64) -> Result<f64> {
    spec.validate()?;
    check_point(x)?;
    if x == spec.c {
        return Ok(0.0);
    }
    let inner_tol = Tolerance {
        abs: 1e-14,
        rel: 1e-11,
        max_intervals: 2000,
    };
    let outer_tol = Tolerance {
        abs: 1e-13,
        rel: 1e-9,
        max_intervals: 2000,
    };
    let mut failure = None;
    let outer = integrate_geometric(
        |y| {
            let eta_y = spec.eta(y);
            let inner = integrate_geometric(
                |z| {
                    let s = sigma_profile(z);
                    if !(s > 0.0) {
                        return f64::NAN;
                    }
                    2.0 * (2.0 * (spec.eta(z) - eta_y)).exp() / (s * s)
                },
                spec.c,
                y,
                inner_tol,
            );
            match inner {
                Ok(r) => r.value,
                Err(e) => {
                    failure.get_or_insert(e);
                    f64::NAN
                }
            }
        },
        spec.c,
        x,
        outer_tol,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    let v = outer?.value;
    if v.is_nan() {
        return Err(invalid("sigma_profile must be positive on the integration range"));
    }
    Ok(v)
}

/// Which case of Feller's test the scale limits fall into.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryCase {
    /// `s(0) = −∞`, `s(∞) < ∞`: 0 is never approached.
    StrictlyPositive,
    /// Both limits finite: 0 is reached with positive probability.
    HitsZeroWithPositiveProb,
    /// `s(0) = −∞`, `s(∞) = ∞`: 0 is approached but never hit.
    NullRecurrentBoundary,
}

impl BoundaryCase {
    pub fn as_str(&self) -> &'static str {
        match self {
            BoundaryCase::StrictlyPositive => "strictly_positive",
            BoundaryCase::HitsZeroWithPositiveProb => "hits_zero_with_positive_prob",
            BoundaryCase::NullRecurrentBoundary => "null_recurrent_boundary",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbInfPositive {
    One,
    Zero,
    Unknown,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbHitFinite {
    Positive,
    Zero,
    Unknown,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    /// `Pr(inf_t h_t > 0)`.
    pub prob_inf_positive: ProbInfPositive,
    /// `Pr(T < ∞)` for the hitting time `T` of 0.
    #[serde(rename = "prob_T_finite")]
    pub prob_t_finite: ProbHitFinite,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FellerClassification {
    pub gamma: f64,
    pub p: f64,
    pub c: f64,
    pub sigma_lower_bounded: bool,
    pub s_at_zero: Extended,
    pub s_at_inf: Extended,
    /// `None` when the limits match none of the three cases.
    pub case_tag: Option<BoundaryCase>,
    pub verdict: Verdict,
    /// `v(x)` near 0 with unit diffusion, reported for the finite-limits case.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub speed_near_zero: Option<f64>,
    pub notes: Vec<String>,
}

/// Maps the scale limits onto the three cases of Feller's test.
pub fn classify_boundary(spec: &RatioSpec) -> Result<FellerClassification> {
    use Extended::*;
    let limits = scale_limits(spec)?;
    let mut notes = Vec::new();
    let mut speed_near_zero = None;
    let (case_tag, verdict) = match (limits.at_zero, limits.at_inf) {
        (NegInfinity, Finite(_)) => (
            Some(BoundaryCase::StrictlyPositive),
            Verdict {
                prob_inf_positive: ProbInfPositive::One,
                prob_t_finite: ProbHitFinite::Zero,
            },
        ),
        (Finite(_), Finite(_)) => {
            let v = speed_function_numeric(spec, &|_| 1.0, 1e-6 * spec.c)?;
            speed_near_zero = Some(v);
            let prob_t_finite = if spec.sigma_lower_bounded && v.is_finite() {
                ProbHitFinite::Positive
            } else {
                notes.push("diffusion not bounded below: finiteness of the hitting time is undetermined".into());
                ProbHitFinite::Unknown
            };
            (
                Some(BoundaryCase::HitsZeroWithPositiveProb),
                Verdict {
                    prob_inf_positive: ProbInfPositive::Unknown,
                    prob_t_finite,
                },
            )
        }
        (NegInfinity, PosInfinity) => {
            notes.push("0 is approached arbitrarily closely but never hit: inf h_t = 0 and T = ∞ almost surely".into());
            notes.push(
                "prob_inf_positive = zero follows Feller's test for these limits; a competing reading asserts inf h_t > 0 almost surely".into(),
            );
            if spec.p == 1.0 && spec.gamma == 0.5 {
                notes.push("critical rate γ = 1/2, p = 1: scale function is logarithmic at both ends".into());
            }
            (
                Some(BoundaryCase::NullRecurrentBoundary),
                Verdict {
                    prob_inf_positive: ProbInfPositive::Zero,
                    prob_t_finite: ProbHitFinite::Zero,
                },
            )
        }
        (z, i) => {
            notes.push(format!("scale limits (s(0), s(∞)) = ({z}, {i}) match no case of Feller's test"));
            (
                None,
                Verdict {
                    prob_inf_positive: ProbInfPositive::Unknown,
                    prob_t_finite: ProbHitFinite::Unknown,
                },
            )
        }
    };
    Ok(FellerClassification {
        gamma: spec.gamma,
        p: spec.p,
        c: spec.c,
        sigma_lower_bounded: spec.sigma_lower_bounded,
        s_at_zero: limits.at_zero,
        s_at_inf: limits.at_inf,
        case_tag,
        verdict,
        speed_near_zero,
        notes,
    })
}
