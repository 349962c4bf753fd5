//! End-to-end checks of the `qmarket` binary: exit codes, output layout,
//! and determinism of the emitted CSVs.

use std::path::Path;
use std::process::{Command, Output};

fn qmarket(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qmarket"))
        .args(args)
        .current_dir(dir)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, contents: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, contents).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn validate_accepts_minimal_config() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(dir.path(), "config.json", r#"{"backend": "mlp"}"#);
    let out = qmarket(&["validate", &config], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn validate_rejects_unknown_keys_with_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(dir.path(), "config.json", r#"{"backend": "mlp", "typo_field": 1}"#);
    let out = qmarket(&["validate", &config], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));
}

#[test]
fn missing_config_file_is_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let out = qmarket(&["run", "does-not-exist.json"], dir.path());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn bad_dataset_path_fails_fast_without_partial_output() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(
        dir.path(),
        "config.json",
        r#"{"backend": "mlp", "gencos": {"kind": "path", "path": "missing.json"}}"#,
    );
    let out = qmarket(&["run", &config, "--out", "record", "--smoke"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(!dir.path().join("record").exists(), "no partial output directory");
}

#[test]
fn smoke_run_produces_the_record_layout() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(dir.path(), "config.json", r#"{"backend": "mlp"}"#);
    let started = std::time::Instant::now();
    let out = qmarket(&["run", &config, "--smoke", "--out", "record", "--seed", "5"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(started.elapsed().as_secs() < 60, "smoke runs must stay fast");
    for file in ["monthly.csv", "ppo_trace.csv", "summary.json", "config_echo.json"] {
        assert!(dir.path().join("record").join(file).exists(), "missing {file}");
    }
    for agent in 0..6 {
        assert!(dir.path().join("record/agents").join(format!("agent-{agent}.csv")).exists());
    }
    // The config echo reloads as a valid configuration (round-trip property).
    let echo = dir.path().join("record/config_echo.json");
    let validate = qmarket(&["validate", echo.to_str().unwrap()], dir.path());
    assert!(validate.status.success());
    // The seed override is reflected in the echo.
    let echoed = std::fs::read_to_string(&echo).unwrap();
    assert!(echoed.contains("\"master_seed\": 5"));
    // Every emitted file re-parses with this build.
    let monthly = std::fs::read_to_string(dir.path().join("record/monthly.csv")).unwrap();
    let rows = qmarket_core::report::parse_monthly_csv(&monthly).unwrap();
    assert_eq!(rows.len(), 3, "initial month plus two upper steps");
    let summary = std::fs::read_to_string(dir.path().join("record/summary.json")).unwrap();
    let parsed: qmarket_core::report::Summary = serde_json::from_str(&summary).unwrap();
    assert_eq!(parsed.months_run, 3);
    assert_eq!(parsed.backend, "mlp");
}

#[test]
fn identical_seeds_give_byte_identical_csvs() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(dir.path(), "config.json", r#"{"backend": "mlp", "master_seed": 99}"#);
    for out_dir in ["a", "b"] {
        let out = qmarket(&["run", &config, "--smoke", "--out", out_dir], dir.path());
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let mut files = vec!["monthly.csv".to_string(), "ppo_trace.csv".to_string()];
    files.extend((0..6).map(|i| format!("agents/agent-{i}.csv")));
    for file in files {
        let a = std::fs::read(dir.path().join("a").join(&file)).unwrap();
        let b = std::fs::read(dir.path().join("b").join(&file)).unwrap();
        assert_eq!(a, b, "{file} differs across identically-seeded runs");
    }
}

#[test]
fn compare_emits_four_metric_rows_for_both_arms() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(
        dir.path(),
        "config.json",
        r#"{"backend": "vqc", "vqc": {"n_layers": 1}, "agent": {"batch_size": 8}}"#,
    );
    let out = qmarket(&["compare", &config, "--smoke", "--out", "cmp"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let csv = std::fs::read_to_string(dir.path().join("cmp/compare.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 5, "header plus 4 metric rows:\n{csv}");
    assert_eq!(lines[0], "metric,with_vqc,without_vqc,reference_with_vqc,reference_without_vqc");
    for line in &lines[1..] {
        assert_eq!(line.split(',').count(), 5, "row: {line}");
        for field in line.split(',') {
            assert!(!field.is_empty(), "incomplete arm in row: {line}");
        }
    }
    assert!(dir.path().join("cmp/with_vqc/monthly.csv").exists());
    assert!(dir.path().join("cmp/without_vqc/monthly.csv").exists());
    assert!(dir.path().join("cmp/comparison.json").exists());
}
