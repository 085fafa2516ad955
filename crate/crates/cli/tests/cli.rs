use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn barrierlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_barrierlab")).args(args).output().expect("binary runs")
}

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

#[test]
fn shipped_configs_validate() {
    let mut n = 0;
    for entry in fs::read_dir(configs_dir()).unwrap() {
        let path = entry.unwrap().path();
        let out = barrierlab(&["validate", path.to_str().unwrap()]);
        assert!(out.status.success(), "{}: {}", path.display(), String::from_utf8_lossy(&out.stderr));
        n += 1;
    }
    assert_eq!(n, 8);
}

#[test]
fn validate_reports_every_problem_with_exit_code_2() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(
        dir.path(),
        "bad.toml",
        "experiment = \"rcbf-safe\"\ntheta = 3.0\ndt = 2.0\n[controller.alpha3]\nfamily = \"cubic\"\n",
    );
    let out = barrierlab(&["validate", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("(0, h(x0)]"), "{err}");
    assert!(err.contains("exceeds horizon"), "{err}");
    assert!(err.contains("{linear, power}"), "{err}");
}

#[test]
fn unparsable_or_missing_config_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(dir.path(), "typo.toml", "experiment = \"rcbf-safe\"\nn_path = 10\n");
    assert_eq!(barrierlab(&["validate", path.to_str().unwrap()]).status.code(), Some(2));
    let missing = dir.path().join("nope.toml");
    assert_eq!(barrierlab(&["run", missing.to_str().unwrap()]).status.code(), Some(2));
    let unknown = write(dir.path(), "unknown.toml", "experiment = \"warp-drive\"\n");
    let out = barrierlab(&["validate", unknown.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("brownian-counterexample"));
}

#[test]
fn feller_classify_prints_json() {
    let out = barrierlab(&["feller-classify", "--gamma", "1", "--p", "0.5", "--sigma-bounded", "true"]);
    assert!(out.status.success());
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["case_tag"], "hits_zero_with_positive_prob");
    assert_eq!(v["verdict"]["prob_T_finite"], "positive");
    assert_eq!(v["gamma"], 1.0);

    let out = barrierlab(&["feller-classify", "--gamma", "2", "--p", "1", "--sigma-bounded", "true", "--c", "3"]);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["case_tag"], "strictly_positive");
    assert_eq!(v["s_at_zero"], "-inf");
    assert_eq!(v["c"], 3.0);
}

#[test]
fn feller_classify_rejects_bad_parameters() {
    let out = barrierlab(&["feller-classify", "--gamma", "-1", "--p", "0.5", "--sigma-bounded", "false"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn run_is_reproducible_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let config = configs_dir().join("rcbf-safe.toml");
    let mut outputs = Vec::new();
    for name in ["a", "b"] {
        let target = dir.path().join(name);
        let out = barrierlab(&[
            "run",
            config.to_str().unwrap(),
            "--out",
            target.to_str().unwrap(),
            "--seed",
            "99",
            "--n-paths",
            "50",
            "--dt",
            "0.01",
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        outputs.push(target);
    }
    for file in ["summary.csv", "report.json", "digest.txt", "sample_path.csv"] {
        let a = fs::read(outputs[0].join(file)).unwrap();
        let b = fs::read(outputs[1].join(file)).unwrap();
        assert_eq!(a, b, "{file} differs");
    }
    assert!(outputs[0].join("metadata.json").exists());

    let report: Value = serde_json::from_slice(&fs::read(outputs[0].join("report.json")).unwrap()).unwrap();
    assert_eq!(report["seed"], 99);
    assert_eq!(report["config"]["n_paths"], 50);
    assert_eq!(report["config"]["dt"], serde_json::json!([0.01]));

    let csv = fs::read_to_string(outputs[0].join("summary.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next(),
        Some("experiment,cell_id,n_paths,dt,horizon,n_exits,p_hat,ci_low,ci_high,classifier_tag,seed")
    );
    assert!(lines.next().unwrap().starts_with("rcbf-safe,dt=1e-2,50,0.01,1.0,"));
}

#[test]
fn unwritable_output_is_a_runtime_failure() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = write(dir.path(), "file", "");
    let config = configs_dir().join("stopping-times.toml");
    let out = barrierlab(&[
        "run",
        config.to_str().unwrap(),
        "--out",
        blocker.join("sub").to_str().unwrap(),
        "--n-paths",
        "10",
        "--dt",
        "0.001",
    ]);
    assert_eq!(out.status.code(), Some(3));
}
