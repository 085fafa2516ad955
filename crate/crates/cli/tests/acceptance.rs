//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.
//!
//! Set `ACCEPTANCE_ONLY=3,7` to run a subset.

use std::process::ExitCode;
use std::time::Instant;

use barrierlab::config::ExperimentConfig;
use barrierlab::experiments::{run_experiment, ExperimentReport};
use barrierlab::report::summary_csv;
use barrierlab_core::feller::{scale_function_closed_form, scale_function_numeric, upper_incomplete_gamma, RatioSpec};
use serde_json::Value;
use statrs::distribution::{ContinuousCDF, Normal};

// Tolerances.
const BROWNIAN_ORACLE_ABS: f64 = 0.01;
const ZCBF_MIN_EXIT: f64 = 0.25;
const SAFE_MAX_EXIT: f64 = 0.01;
const HITS_ZERO_MIN_EXIT: f64 = 0.05;
const NON_HITTING_MAX_EXIT: f64 = 0.01;
const SCALE_ABS: f64 = 1e-6;
const GAMMA_REL: f64 = 1e-9;
const GAMMA_TAIL_MAX: f64 = 1e-12;
const LOCAL_TIME_REL: f64 = 0.05;
const GAP_MAX_STEPS: f64 = 10.0;
const B_TILDE_SE_MULT: f64 = 3.0;

type Criterion = (u32, &'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

fn run(toml: &str) -> ExperimentReport {
    let cfg = ExperimentConfig::from_toml(toml).expect("config parses").resolve().expect("config resolves");
    run_experiment(&cfg).expect("experiment runs")
}

fn num(v: &Value, pointer: &str) -> f64 {
    v.pointer(pointer).and_then(Value::as_f64).unwrap_or_else(|| panic!("missing {pointer}"))
}

fn p_hats(report: &ExperimentReport) -> Vec<(f64, f64)> {
    report.cells.iter().map(|c| (c.dt, c.p_hat.expect("exit cell"))).collect()
}

fn c1_brownian() -> Outcome {
    let r = run(
        r#"
experiment = "brownian-counterexample"
seed = 1
n_paths = 100000
dt = 1e-4
horizon = 1.0
x0 = 1.0
theta = 1.0
bridge_correction = true
"#,
    );
    let oracle = 2.0 * Normal::standard().cdf(-1.0);
    let p = r.cells[0].p_hat.unwrap();
    Outcome {
        pass: (p - oracle).abs() <= BROWNIAN_ORACLE_ABS,
        detail: format!("p_hat {p:.5}, oracle 2Φ(−1) = {oracle:.5}, |diff| ≤ {BROWNIAN_ORACLE_ABS}"),
    }
}

fn c2_zcbf() -> Outcome {
    let r = run(
        r#"
experiment = "zcbf-fails"
seed = 2
n_paths = 100000
dt = 1e-4
horizon = 1.0
x0 = 1.0
bridge_correction = true
"#,
    );
    let p = r.cells[0].p_hat.unwrap();
    let margin = num(&r.details, "/min_zcbf_margin_on_grid");
    Outcome {
        pass: p >= ZCBF_MIN_EXIT && margin >= 0.0,
        detail: format!("p_hat {p:.5} ≥ {ZCBF_MIN_EXIT}, smallest ZCBF margin on grid {margin:.2e} ≥ 0"),
    }
}

fn c3_safe() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for name in ["rcbf-safe", "modified-zcbf-safe"] {
        let r = run(&format!(
            r#"
experiment = "{name}"
seed = 3
n_paths = 10000
dt_sweep = [1e-2, 1e-3, 1e-4]
horizon = 1.0
x0 = 1.0
bridge_correction = true

[controller.alpha3]
family = "linear"
k = 1.0
"#
        ));
        let cells = p_hats(&r);
        let finest = cells.iter().find(|(dt, _)| *dt == 1e-4).unwrap().1;
        let monotone = cells.windows(2).all(|w| w[1].1 <= w[0].1);
        pass &= finest <= SAFE_MAX_EXIT && monotone;
        let seq: Vec<String> = cells.iter().map(|(dt, p)| format!("{dt:e}:{p:.4}")).collect();
        parts.push(format!("{name} [{}] non-increasing={monotone}", seq.join(" ")));
    }
    Outcome {
        pass,
        detail: format!("{}; need p_hat(1e-4) ≤ {SAFE_MAX_EXIT}", parts.join("; ")),
    }
}

fn c4_sweep() -> Outcome {
    let r = run(
        r#"
experiment = "divergence-rate-sweep"
seed = 4
n_paths = 10000
dt = 1e-4
horizon = 1.0
x0 = 1.0
bridge_correction = true

[sweep]
gamma = [0.5, 1.0, 2.0]
p = [0.25, 0.5, 0.75, 1.0, 1.5, 2.0]
sigma_lower_bounded = true
"#,
    );
    let mut bad = Vec::new();
    for c in &r.cells {
        let p = c.p_hat.unwrap();
        let ok = match c.classifier_tag.as_str() {
            "hits_zero_with_positive_prob" => p > HITS_ZERO_MIN_EXIT,
            "strictly_positive" | "null_recurrent_boundary" => p < NON_HITTING_MAX_EXIT,
            _ => false,
        };
        if !ok {
            bad.push(format!("{} {} p_hat {p:.4}", c.cell_id, c.classifier_tag));
        }
    }
    Outcome {
        pass: bad.is_empty(),
        detail: if bad.is_empty() {
            format!("all {} cells consistent with their tag", r.cells.len())
        } else {
            format!("{} of {} cells inconsistent: {}", bad.len(), r.cells.len(), bad.join(", "))
        },
    }
}

fn c5_scale() -> Outcome {
    let mut worst: f64 = 0.0;
    let specs = [
        RatioSpec::new(0.6, 1.0),
        RatioSpec::new(1.0, 1.0),
        RatioSpec::new(2.0, 1.0),
        RatioSpec::new(1.0, 0.5),
    ];
    for spec in &specs {
        for i in 0..=200 {
            let x = 0.01 * 1e4f64.powf(i as f64 / 200.0);
            let numeric = scale_function_numeric(spec, x).unwrap();
            let closed = scale_function_closed_form(spec, x).unwrap().expect("closed form exists");
            worst = worst.max((numeric - closed).abs());
        }
    }
    Outcome {
        pass: worst <= SCALE_ABS,
        detail: format!("max |quadrature − closed form| = {worst:.2e} ≤ {SCALE_ABS:e}"),
    }
}

fn c6_gamma() -> Outcome {
    let mut worst: f64 = 0.0;
    for x in [0.1, 1.0, 10.0] {
        let g = upper_incomplete_gamma(1.0, x).unwrap();
        worst = worst.max((g - (-x).exp()).abs() / (-x).exp());
    }
    for a in [0.5, 2.5] {
        for x in [0.1, 1.0, 10.0] {
            let lhs = upper_incomplete_gamma(a + 1.0, x).unwrap();
            let rhs = a * upper_incomplete_gamma(a, x).unwrap() + x.powf(a) * (-x).exp();
            worst = worst.max((lhs - rhs).abs() / rhs.abs());
        }
    }
    let tail = upper_incomplete_gamma(0.5, 1e6).unwrap();
    Outcome {
        pass: worst <= GAMMA_REL && tail < GAMMA_TAIL_MAX,
        detail: format!("max rel error {worst:.2e} ≤ {GAMMA_REL:e}, Γ(0.5, 1e6) = {tail:.2e} < {GAMMA_TAIL_MAX:e}"),
    }
}

fn c7_tanaka() -> Outcome {
    let r = run(
        r#"
experiment = "tanaka-check"
seed = 7
n_paths = 50000
dt_sweep = [1e-3, 1e-4]
horizon = 1.0
x0 = 0.0
level = 0.0
bridge_correction = false
"#,
    );
    let oracle = (2.0 / std::f64::consts::PI).sqrt();
    let cells = r.details.as_array().unwrap();
    let at = |dt: f64| cells.iter().find(|c| num(c, "/dt") == dt).unwrap();
    let mean = num(at(1e-4), "/mean_l_hat");
    let res_coarse = num(at(1e-3), "/mean_abs_residual");
    let res_fine = num(at(1e-4), "/mean_abs_residual");
    let rel = (mean - oracle).abs() / oracle;
    Outcome {
        pass: rel <= LOCAL_TIME_REL && res_coarse > res_fine,
        detail: format!(
            "mean L_hat {mean:.5} vs √(2/π) {oracle:.5} (rel {rel:.4} ≤ {LOCAL_TIME_REL}); residual {res_coarse:.3e} at 1e-3 > {res_fine:.3e} at 1e-4"
        ),
    }
}

fn c8_stopping() -> Outcome {
    let r = run(
        r#"
experiment = "stopping-times"
seed = 8
n_paths = 10000
dt = 1e-5
horizon = 0.05
x0 = 1.0
theta = 1.0
bridge_correction = false
"#,
    );
    let cell = &r.details.as_array().unwrap()[0];
    let median = cell.pointer("/median_gap").and_then(Value::as_f64).unwrap_or(f64::INFINITY);
    Outcome {
        pass: median <= GAP_MAX_STEPS * 1e-5,
        detail: format!("median(η₁ − ζ₀) = {median:.2e} ≤ {:.0e}", GAP_MAX_STEPS * 1e-5),
    }
}

fn c9_b_tilde() -> Outcome {
    let r = run(
        r#"
experiment = "b-tilde-bound"
seed = 9
n_paths = 10000
n_pilot = 10000
delta = 0.1
dt = 1e-4
horizon = 1.0
x0 = 1.0
bridge_correction = true

[controller.alpha3]
family = "linear"
k = 1.0
"#,
    );
    let frac = num(&r.details, "/report/violation_fraction");
    let se = num(&r.details, "/report/standard_error");
    let limit = 0.05 + B_TILDE_SE_MULT * se;
    Outcome {
        pass: frac <= limit,
        detail: format!("violation fraction {frac:.4} ≤ 0.05 + {B_TILDE_SE_MULT}·{se:.4} = {limit:.4}"),
    }
}

fn c10_determinism() -> Outcome {
    let mut differing = Vec::new();
    for exp in barrierlab::config::Experiment::ALL {
        let toml = format!("experiment = \"{}\"\nseed = 10\nn_paths = 64\ndt = 1e-3\n", exp.name());
        let first = run(&toml);
        let second = run(&toml);
        let csv_same = summary_csv(&first.cells).unwrap() == summary_csv(&second.cells).unwrap();
        let json_same = serde_json::to_vec_pretty(&first).unwrap() == serde_json::to_vec_pretty(&second).unwrap();
        if !(csv_same && json_same) {
            differing.push(exp.name());
        }
    }
    Outcome {
        pass: differing.is_empty(),
        detail: if differing.is_empty() {
            "summary CSV and report JSON identical on rerun for all 8 experiments".into()
        } else {
            format!("outputs differ on rerun: {}", differing.join(", "))
        },
    }
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        (1, "brownian counterexample", c1_brownian),
        (2, "zcbf fails", c2_zcbf),
        (3, "rcbf and modified zcbf safe", c3_safe),
        (4, "divergence-rate sweep vs classifier", c4_sweep),
        (5, "scale-function quadrature", c5_scale),
        (6, "incomplete gamma", c6_gamma),
        (7, "tanaka local time", c7_tanaka),
        (8, "stopping-time coincidence", c8_stopping),
        (9, "b-tilde bound", c9_b_tilde),
        (10, "determinism", c10_determinism),
    ];
    let only: Option<Vec<u32>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|t| t.trim().parse().ok()).collect());
    let mut failed = 0;
    for (id, name, f) in criteria {
        if only.as_ref().is_some_and(|o| !o.contains(&id)) {
            continue;
        }
        let clock = Instant::now();
        let out = f();
        let tag = if out.pass { "PASS" } else { "FAIL" };
        println!("{tag} {id:>2} {name}: {} ({:.1} s)", out.detail, clock.elapsed().as_secs_f64());
        failed += (!out.pass) as u32;
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
