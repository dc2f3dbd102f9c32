use std::process::{Command, Output};

use sparsegap::report::ExperimentReport;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sparsegap")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn no_subcommand_is_a_usage_error() {
    let o = run(&[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
}

#[test]
fn unknown_flag_is_a_usage_error() {
    assert_eq!(run(&["experiment", "scaling", "--frobnicate"]).status.code(), Some(1));
    assert_eq!(run(&["solve", "--estimator", "ridge"]).status.code(), Some(1));
}

#[test]
fn runtime_failures_exit_2() {
    // Odd n is rejected by the block builders.
    assert_eq!(run(&["design", "certify", "--provenance", "local-min", "--n", "15"]).status.code(), Some(2));
    assert_eq!(run(&["experiment", "scaling", "--n", "32,16"]).status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.json");
    let o = run(&["experiment", "scaling", "--config", missing.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("nope.json"));
}

#[test]
fn certify_corollary_meets_gamma() {
    let o = run(&["design", "certify", "--provenance", "corollary", "--n", "64", "--k", "2", "--gamma", "0.25"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(v["re_lower_bound"].as_f64().unwrap() >= 0.25 * (1.0 - 1e-9));
    assert!((v["max_col_norm_ratio"].as_f64().unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn build_then_certify_saved_design() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("x.csv");
    let p = path.to_str().unwrap();
    assert_eq!(run(&["design", "build", "--provenance", "simulation", "--n", "32", "--out", p]).status.code(), Some(0));
    assert!(path.with_extension("json").exists());
    let o = run(&["design", "certify", "--input", p]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!((v["max_col_norm_ratio"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    let o = run(&["solve", "--design", p, "--estimator", "l0", "--seed", "3"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).starts_with("estimator,lambda,prediction_error"));
}

#[test]
fn scaling_experiment_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("r.csv");
    let svg = dir.path().join("r.svg");
    let o = run(&[
        "experiment",
        "scaling",
        "--n",
        "16,32,64,128,256",
        "--trials",
        "4",
        "--seed",
        "42",
        "--estimators",
        "l0,lasso",
        "--out",
        csv.to_str().unwrap(),
        "--svg",
        svg.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let report = ExperimentReport::from_csv(&std::fs::read_to_string(&csv).unwrap()).unwrap();
    assert_eq!(report.rows.len(), 10);
    assert_eq!(report.slopes.len(), 2);
    assert!(std::fs::read_to_string(&svg).unwrap().contains("<svg"));
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    std::fs::write(&cfg, r#"{"n_values": [8, 16], "trials": 3, "estimators": ["rwlasso"], "master_seed": 5}"#).unwrap();
    let o = run(&["experiment", "dalalyan", "--config", cfg.to_str().unwrap(), "--trials", "2"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let report = ExperimentReport::from_csv(&stdout(&o)).unwrap();
    assert!(report.rows.iter().all(|r| r.trials == 2 && r.estimator == "rwlasso"));
    std::fs::write(&cfg, r#"{"trials": 3, "typo_field": 1}"#).unwrap();
    assert_eq!(run(&["experiment", "dalalyan", "--config", cfg.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn descend_and_landscape_run() {
    let dir = tempfile::tempdir().unwrap();
    let traj = dir.path().join("t.csv");
    let o = run(&["descend", "--n", "16", "--lambda", "0.5", "--seed", "1", "--out", traj.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("terminated = true"));
    assert!(std::fs::read_to_string(&traj).unwrap().starts_with("step,objective"));
    // eta above the admissible bound is refused.
    assert_eq!(run(&["descend", "--n", "16", "--eta", "10"]).status.code(), Some(2));
    let cat = dir.path().join("m.csv");
    let o = run(&["landscape", "--n", "16", "--lambda", "0.1,1", "--out", cat.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("# inf over lambda"));
    assert!(std::fs::read_to_string(&cat).unwrap().starts_with("block,u1,u2"));
}
