//! Experiment configuration: a TOML file per run, overridable from the
//! command line, resolved against per-experiment defaults.

use std::fmt;
use std::path::{Path, PathBuf};

use barrierlab_core::barrier::AlphaFn;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Registered experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    BrownianCounterexample,
    ZcbfFails,
    ModifiedZcbfSafe,
    RcbfSafe,
    DivergenceRateSweep,
    StoppingTimes,
    TanakaCheck,
    BTildeBound,
}

impl Experiment {
    pub const ALL: [Experiment; 8] = [
        Experiment::BrownianCounterexample,
        Experiment::ZcbfFails,
        Experiment::ModifiedZcbfSafe,
        Experiment::RcbfSafe,
        Experiment::DivergenceRateSweep,
        Experiment::StoppingTimes,
        Experiment::TanakaCheck,
        Experiment::BTildeBound,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Experiment::BrownianCounterexample => "brownian-counterexample",
            Experiment::ZcbfFails => "zcbf-fails",
            Experiment::ModifiedZcbfSafe => "modified-zcbf-safe",
            Experiment::RcbfSafe => "rcbf-safe",
            Experiment::DivergenceRateSweep => "divergence-rate-sweep",
            Experiment::StoppingTimes => "stopping-times",
            Experiment::TanakaCheck => "tanaka-check",
            Experiment::BTildeBound => "b-tilde-bound",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|e| e.name() == name)
    }

    /// Whether the experiment simulates against the barrier `h(x) = x`.
    fn uses_half_line(&self) -> bool {
        !matches!(self, Experiment::TanakaCheck)
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub sigma: Option<f64>,
}

/// Class-κ function as written in the file; checked during resolution so an
/// unknown family is reported alongside every other problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlphaConfig {
    pub family: String,
    pub k: Option<f64>,
    pub r: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerConfig {
    pub alpha3: Option<AlphaConfig>,
    pub u_max: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub gamma: Option<Vec<f64>>,
    pub p: Option<Vec<f64>>,
    pub sigma_lower_bounded: Option<bool>,
    pub c: Option<f64>,
}

/// The file as written. Every field except `experiment` has a default.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: String,
    pub seed: Option<u64>,
    pub n_paths: Option<u64>,
    pub dt: Option<f64>,
    pub dt_sweep: Option<Vec<f64>>,
    pub horizon: Option<f64>,
    pub x0: Option<f64>,
    pub bridge_correction: Option<bool>,
    pub theta: Option<f64>,
    pub delta: Option<f64>,
    pub n_pilot: Option<u64>,
    pub max_pairs: Option<usize>,
    pub level: Option<f64>,
    pub eps: Option<f64>,
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub controller: ControllerConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
}

/// Command-line values that replace the file's.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub n_paths: Option<u64>,
    pub dt: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResolvedSweep {
    pub gamma: Vec<f64>,
    pub p: Vec<f64>,
    pub sigma_lower_bounded: bool,
    pub c: f64,
}

/// A fully specified run. Embedded verbatim in every report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResolvedConfig {
    pub experiment: Experiment,
    pub seed: u64,
    pub n_paths: u64,
    pub dt: Vec<f64>,
    pub horizon: f64,
    pub x0: f64,
    pub sigma: f64,
    pub bridge_correction: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_pairs: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub level: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_pilot: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha3: Option<AlphaFn>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub u_max: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<ResolvedSweep>,
    /// Where outputs go; left out of reports so they do not depend on it.
    #[serde(skip)]
    pub output_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Parse(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(out) = &o.out {
            self.output_dir = Some(out.clone());
        }
        if let Some(seed) = o.seed {
            self.seed = Some(seed);
        }
        if let Some(n) = o.n_paths {
            self.n_paths = Some(n);
        }
        if let Some(dt) = o.dt {
            self.dt = Some(dt);
            self.dt_sweep = None;
        }
    }

    /// Fills defaults and checks every field, reporting all problems at once.
    pub fn resolve(&self) -> Result<ResolvedConfig, CliError> {
        let Some(exp) = Experiment::parse(&self.experiment) else {
            let names: Vec<_> = Experiment::ALL.iter().map(Experiment::name).collect();
            return Err(CliError::Config(vec![format!(
                "experiment: unknown name '{}'; registered: {}",
                self.experiment,
                names.join(", ")
            )]));
        };
        let mut errors = Vec::new();
        let d = Defaults::for_experiment(exp);

        let seed = self.seed.unwrap_or(d.seed);
        let n_paths = self.n_paths.unwrap_or(d.n_paths);
        if n_paths == 0 {
            errors.push("n_paths: must be at least 1".to_string());
        }
        let horizon = self.horizon.unwrap_or(d.horizon);
        if !(horizon > 0.0 && horizon.is_finite()) {
            errors.push(format!("horizon: must be positive and finite, got {horizon}"));
        }
        let dt = match (&self.dt, &self.dt_sweep) {
            (Some(_), Some(_)) => {
                errors.push("dt, dt_sweep: give one or the other".to_string());
                Vec::new()
            }
            (Some(dt), None) => vec![*dt],
            (None, Some(list)) => list.clone(),
            (None, None) => d.dt.clone(),
        };
        if dt.is_empty() && !errors.iter().any(|e| e.starts_with("dt")) {
            errors.push("dt_sweep: must list at least one step".to_string());
        }
        for &step in &dt {
            if !(step > 0.0 && step.is_finite()) {
                errors.push(format!("dt: must be positive and finite, got {step}"));
            } else if horizon > 0.0 && step > horizon {
                errors.push(format!("dt: step {step} exceeds horizon {horizon}"));
            }
        }
        let x0 = self.x0.unwrap_or(d.x0);
        if !x0.is_finite() {
            errors.push(format!("x0: must be finite, got {x0}"));
        } else if exp.uses_half_line() && x0 <= 0.0 {
            errors.push(format!("x0: h(x0) = x0 must be positive, got {x0}"));
        }
        let sigma = self.model.sigma.unwrap_or(1.0);
        if !(sigma >= 0.0 && sigma.is_finite()) {
            errors.push(format!("model.sigma: must be non-negative and finite, got {sigma}"));
        }
        let bridge_correction = self.bridge_correction.unwrap_or(d.bridge);

        let theta = match exp {
            Experiment::StoppingTimes => Some(self.theta.unwrap_or(x0)),
            _ => self.theta,
        };
        if let Some(t) = theta {
            if !(t > 0.0 && t <= x0) {
                errors.push(format!(
                    "theta: must lie in (0, h(x0)] = (0, {x0}] so the first crossing sequence is defined, got {t}"
                ));
            }
        }
        let max_pairs = (exp == Experiment::StoppingTimes).then(|| self.max_pairs.unwrap_or(2));
        if max_pairs == Some(0) {
            errors.push("max_pairs: must be at least 1".to_string());
        }
        let level = (exp == Experiment::TanakaCheck).then(|| self.level.unwrap_or(0.0));
        if let Some(e) = self.eps {
            if !(e > 0.0 && e.is_finite()) {
                errors.push(format!("eps: must be positive, got {e}"));
            }
        }

        let (delta, n_pilot) = if exp == Experiment::BTildeBound {
            let delta = self.delta.unwrap_or(0.1);
            if !(delta > 0.0 && delta <= 1.0) {
                errors.push(format!("delta: must lie in (0, 1], got {delta}"));
            }
            let n_pilot = self.n_pilot.unwrap_or(n_paths);
            if n_pilot == 0 {
                errors.push("n_pilot: must be at least 1".to_string());
            }
            (Some(delta), Some(n_pilot))
        } else {
            (self.delta, self.n_pilot)
        };

        let alpha3 = if d.needs_alpha || self.controller.alpha3.is_some() {
            match &self.controller.alpha3 {
                None => Some(AlphaFn::identity()),
                Some(a) => resolve_alpha(a, &mut errors),
            }
        } else {
            None
        };
        if let Some(m) = self.controller.u_max {
            if !(m > 0.0) {
                errors.push(format!("controller.u_max: must be positive, got {m}"));
            }
        }

        let sweep = if exp == Experiment::DivergenceRateSweep {
            let s = &self.sweep;
            let gamma = s.gamma.clone().unwrap_or_else(|| vec![0.5, 1.0, 2.0]);
            let p = s.p.clone().unwrap_or_else(|| vec![0.25, 0.5, 0.75, 1.0, 1.5, 2.0]);
            if gamma.is_empty() || p.is_empty() {
                errors.push("sweep.gamma, sweep.p: must be non-empty".to_string());
            }
            for g in &gamma {
                if !(*g >= 0.0 && g.is_finite()) {
                    errors.push(format!("sweep.gamma: entries must be non-negative, got {g}"));
                }
            }
            for q in &p {
                if !(*q >= 0.0 && q.is_finite()) {
                    errors.push(format!("sweep.p: entries must be non-negative, got {q}"));
                }
            }
            let c = s.c.unwrap_or(1.0);
            if !(c > 0.0 && c.is_finite()) {
                errors.push(format!("sweep.c: must be positive, got {c}"));
            }
            Some(ResolvedSweep {
                gamma,
                p,
                sigma_lower_bounded: s.sigma_lower_bounded.unwrap_or(true),
                c,
            })
        } else {
            None
        };

        if !errors.is_empty() {
            return Err(CliError::Config(errors));
        }
        Ok(ResolvedConfig {
            experiment: exp,
            seed,
            n_paths,
            dt,
            horizon,
            x0,
            sigma,
            bridge_correction,
            theta,
            max_pairs,
            level,
            eps: self.eps,
            delta,
            n_pilot,
            alpha3,
            u_max: self.controller.u_max,
            sweep,
            output_dir: self
                .output_dir
                .clone()
                .unwrap_or_else(|| PathBuf::from("out").join(exp.name())),
        })
    }
}

fn resolve_alpha(a: &AlphaConfig, errors: &mut Vec<String>) -> Option<AlphaFn> {
    let alpha = match a.family.as_str() {
        "linear" => AlphaFn::Linear { k: a.k.unwrap_or(1.0) },
        "power" => AlphaFn::Power {
            k: a.k.unwrap_or(1.0),
            r: a.r.unwrap_or(1.0),
        },
        other => {
            errors.push(format!(
                "controller.alpha3.family: unknown family '{other}'; expected one of {{{}}}",
                AlphaFn::FAMILIES.join(", ")
            ));
            return None;
        }
    };
    match alpha.validate() {
        Ok(()) => Some(alpha),
        Err(e) => {
            errors.push(format!("controller.alpha3: {e}"));
            None
        }
    }
}

struct Defaults {
    seed: u64,
    n_paths: u64,
    dt: Vec<f64>,
    horizon: f64,
    x0: f64,
    bridge: bool,
    needs_alpha: bool,
}

impl Defaults {
    fn for_experiment(exp: Experiment) -> Self {
        let base = Defaults {
            seed: 1,
            n_paths: 100_000,
            dt: vec![1e-4],
            horizon: 1.0,
            x0: 1.0,
            bridge: true,
            needs_alpha: false,
        };
        match exp {
            Experiment::BrownianCounterexample | Experiment::ZcbfFails => base,
            Experiment::ModifiedZcbfSafe | Experiment::RcbfSafe => Defaults {
                n_paths: 10_000,
                dt: vec![1e-2, 1e-3, 1e-4],
                needs_alpha: true,
                ..base
            },
            Experiment::DivergenceRateSweep => Defaults { n_paths: 10_000, ..base },
            Experiment::StoppingTimes => Defaults {
                n_paths: 10_000,
                dt: vec![1e-3, 1e-4, 1e-5],
                horizon: 0.05,
                bridge: false,
                ..base
            },
            Experiment::TanakaCheck => Defaults {
                n_paths: 50_000,
                dt: vec![1e-3, 1e-4],
                x0: 0.0,
                bridge: false,
                ..base
            },
            Experiment::BTildeBound => Defaults {
                n_paths: 10_000,
                needs_alpha: true,
                ..base
            },
        }
    }
}
