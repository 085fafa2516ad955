use barrierlab::config::{Experiment, ExperimentConfig};
use barrierlab::experiments::{run_experiment_with, ExperimentReport};
use barrierlab_core::montecarlo::Execution;

fn run(toml: &str, exec: Execution) -> ExperimentReport {
    let cfg = ExperimentConfig::from_toml(toml).unwrap().resolve().unwrap();
    run_experiment_with(&cfg, exec).unwrap()
}

#[test]
fn every_experiment_runs_at_small_scale() {
    for exp in Experiment::ALL {
        let toml = format!("experiment = \"{}\"\nn_paths = 32\ndt = 1e-3\n", exp.name());
        let r = run(&toml, Execution::Sequential);
        assert_eq!(r.experiment, exp);
        assert!(!r.cells.is_empty(), "{exp}");
        assert!(!r.digest.is_empty(), "{exp}");
        assert!(r.cells.iter().all(|c| c.experiment == exp.name() && c.seed == r.seed));
    }
}

#[cfg(feature = "parallel")]
#[test]
fn scheduling_does_not_change_reports() {
    use barrierlab::report::summary_csv;

    for exp in [Experiment::RcbfSafe, Experiment::StoppingTimes, Experiment::BTildeBound] {
        let toml = format!("experiment = \"{}\"\nn_paths = 48\ndt = 1e-3\nseed = 5\n", exp.name());
        let seq = run(&toml, Execution::Sequential);
        let par = run(&toml, Execution::Parallel);
        assert_eq!(summary_csv(&seq.cells).unwrap(), summary_csv(&par.cells).unwrap());
        assert_eq!(seq.details, par.details);
    }
}

#[test]
fn sweep_rows_carry_classifier_tags() {
    let toml = r#"
experiment = "divergence-rate-sweep"
n_paths = 16
dt = 1e-2
[sweep]
gamma = [1.0, 2.0]
p = [0.5, 1.0]
"#;
    let r = run(toml, Execution::Sequential);
    let tags: Vec<(&str, &str)> = r.cells.iter().map(|c| (c.cell_id.as_str(), c.classifier_tag.as_str())).collect();
    assert_eq!(
        tags,
        [
            ("gamma=1_p=0.5", "hits_zero_with_positive_prob"),
            ("gamma=2_p=0.5", "hits_zero_with_positive_prob"),
            ("gamma=1_p=1", "strictly_positive"),
            ("gamma=2_p=1", "strictly_positive"),
        ]
    );
}

#[test]
fn zero_noise_never_exits() {
    let toml = "experiment = \"brownian-counterexample\"\nn_paths = 8\ndt = 1e-2\n[model]\nsigma = 0.0\n";
    let r = run(toml, Execution::Sequential);
    assert_eq!(r.cells[0].n_exits, Some(0));
    assert_eq!(r.details["oracle"], 0.0);
}

#[test]
fn tanaka_oracle_is_half_normal_mean() {
    let toml = "experiment = \"tanaka-check\"\nn_paths = 400\ndt = 1e-3\nseed = 11\n";
    let r = run(toml, Execution::Sequential);
    let cell = &r.details[0];
    let oracle = cell["oracle"].as_f64().unwrap();
    assert!((oracle - 0.7978845608028654).abs() < 1e-12);
    let mean = cell["mean_l_hat"].as_f64().unwrap();
    let se = cell["se_l_hat"].as_f64().unwrap();
    assert!((mean - oracle).abs() < 4.0 * se + 0.05, "{mean} ± {se}");
}
