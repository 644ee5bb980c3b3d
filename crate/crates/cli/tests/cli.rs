use std::process::{Command, Output};

fn sboxlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sboxlab")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn analyze_fixtures() {
    let o = sboxlab(&["analyze", "--fixture", "aes"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.contains("du=4 "), "{text}");
    assert!(text.contains("nl=112 "), "{text}");
    let o = sboxlab(&["analyze", "--fixture", "power:5:3"]);
    assert!(stdout(&o).contains("nl=12 "));
}

#[test]
fn analyze_file_and_bad_input() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("ctc.txt");
    std::fs::write(&p, "7 6 0 4 2 5 1 3\n").unwrap();
    let o = sboxlab(&["analyze", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("bijective=true"));
    std::fs::write(&p, "1 2 x\n").unwrap();
    assert_eq!(sboxlab(&["analyze", p.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(sboxlab(&[]).status.code(), Some(2));
    assert_eq!(sboxlab(&["anneal", "--bogus"]).status.code(), Some(2));
    assert_eq!(sboxlab(&["memetic", "--set", "memetic.popsize=abc"]).status.code(), Some(2));
    assert_eq!(sboxlab(&["batch"]).status.code(), Some(2));
}

#[test]
fn normalize_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("report.json");
    let o = sboxlab(&["normalize", "--fixture", "power:5:3", "--out", report.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let j: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(j["all_satisfied"], true);
    let result = j["result"].as_array().unwrap();
    assert_eq!(result[3], 5);
    assert!(j["certificate"]["in_map"]["rows"].is_array());
}

#[test]
fn engines_run_small_batches() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("m");
    let o = sboxlab(&[
        "memetic", "--n", "4", "--runs", "2", "--seed", "5", "--popsize", "10", "--generations", "2",
        "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert!(out.join("run-0001.json").exists());
    assert!(out.join("summary.csv").exists());
    let o = sboxlab(&["aco", "--n", "4", "--ants", "4", "--iterations", "2", "--constrain-powers"]);
    assert_eq!(o.status.code(), Some(0));
    let o = sboxlab(&[
        "anneal", "--n", "4", "--t0", "5", "--set", "sa.max_inner_loops=100", "--set", "sa.max_outer_loops=5",
        "--set", "sa.max_frozen_outer_loops=2",
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("% DU"));
}

#[test]
fn batch_from_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.cfg");
    std::fs::write(&cfg, "engine = aco\nn = 4\nruns = 2\naco.ants = 4\naco.iterations = 2\n").unwrap();
    let o = sboxlab(&["batch", "--config", cfg.to_str().unwrap(), "--jobs", "1"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).lines().filter(|l| l.starts_with("run ")).count(), 2);
}

#[test]
fn calibrate_and_verify() {
    let o = sboxlab(&["calibrate-temp", "--n", "4", "--samples", "2000"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).starts_with("t0="));
    let o = sboxlab(&["verify"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert_eq!(stdout(&o).matches("PASS").count(), 6);
}
