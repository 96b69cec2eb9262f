//! End-to-end runs of the `pbench` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use pbench::io::{read_estimates, read_records, read_t1, write_estimates, Header};

fn pbench(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pbench")).args(args).output().expect("binary runs")
}

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Data rows of a CSV output: lines after the `#` header and column names.
fn data_rows(path: &Path) -> usize {
    let text = std::fs::read_to_string(path).unwrap();
    text.lines().filter(|l| !l.starts_with('#')).count() - 1
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let path = dir.join("config.json");
    std::fs::write(&path, body).unwrap();
    path
}

#[test]
fn simulate_analyze_report_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    let cfg = config("depolarizing.json");
    assert!(pbench(&["simulate", "--config", s(&cfg), "--out", s(out)]).status.success());
    assert!(pbench(&["analyze", "--records", s(&out.join("records.csv")), "--config", s(&cfg), "--out", s(out)]).status.success());
    let estimates = read_estimates(&out.join("estimates.csv")).unwrap();
    assert!(!estimates.rows.is_empty());
    assert!(estimates.rows.iter().all(|r| r.values().is_some()));

    let report = out.join("report");
    std::fs::create_dir(&report).unwrap();
    let result = pbench(&["report", "--estimates", s(&out.join("estimates.csv")), "--out", s(&report)]);
    assert!(result.status.success(), "{}", String::from_utf8_lossy(&result.stderr));
    assert_eq!(data_rows(&report.join("series.csv")), estimates.rows.len());
    // One window is too few for a histogram; the file keeps its header.
    assert_eq!(estimates.rows.len(), 1);
    assert_eq!(data_rows(&report.join("histograms.csv")), 0);
    let summary: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(report.join("summary.json")).unwrap()).unwrap();
    assert!(summary.is_object());
}

#[test]
fn noise_free_window_reports_degenerate_fit() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    let cfg = config("noise_free.json");
    assert!(pbench(&["simulate", "--config", s(&cfg), "--out", s(out)]).status.success());
    let result = pbench(&["analyze", "--records", s(&out.join("records.csv")), "--config", s(&cfg), "--out", s(out)]);
    assert!(result.status.success());
    let rows = read_estimates(&out.join("estimates.csv")).unwrap().rows;
    assert_eq!(rows.len(), 1);
    assert!(rows[0].values().is_none());
}

#[test]
fn two_point_config_record_count_and_t1_grid() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    assert!(pbench(&["simulate", "--config", s(&config("two_point.json")), "--out", s(out)]).status.success());
    // 600 cycles × 2 points × 7 lengths × 4 variants.
    assert_eq!(read_records(&out.join("records.csv")).unwrap().rows.len(), 33_600);
    assert!(!read_t1(&out.join("t1_grid.csv")).unwrap().rows.is_empty());
}

#[test]
fn report_of_three_windows_has_three_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    let cfg = write_config(
        out,
        r#"{"format_version": "1.0", "seed": 9,
            "scenario": {"t1_base": 2e-5, "operating_points": [{"label": "q", "frequency": 5.0}]},
            "plan": {"cycles": 60, "cycle_period": 0.1},
            "analysis": {"estimator": {"bootstrap_resamples": 100}}}"#,
    );
    assert!(pbench(&["simulate", "--config", s(&cfg), "--out", s(out)]).status.success());
    assert!(pbench(&["analyze", "--records", s(&out.join("records.csv")), "--config", s(&cfg), "--out", s(out)]).status.success());
    assert!(pbench(&["report", "--estimates", s(&out.join("estimates.csv")), "--out", s(out)]).status.success());
    assert_eq!(data_rows(&out.join("series.csv")), 3);
}

#[test]
fn report_of_empty_estimates_keeps_headers() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    let estimates = out.join("estimates.csv");
    write_estimates(&estimates, &Header::new("estimates"), &[]).unwrap();
    let result = pbench(&["report", "--estimates", s(&estimates), "--out", s(out)]);
    assert!(result.status.success(), "{}", String::from_utf8_lossy(&result.stderr));
    assert_eq!(data_rows(&out.join("series.csv")), 0);
    assert_eq!(data_rows(&out.join("histograms.csv")), 0);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();

    let bad = write_config(out, r#"{"format_version": "1.0", "seed": 1}"#);
    assert_eq!(pbench(&["simulate", "--config", s(&bad), "--out", s(out)]).status.code(), Some(2));
    let missing = out.join("nope.json");
    assert_eq!(pbench(&["simulate", "--config", s(&missing), "--out", s(out)]).status.code(), Some(2));

    let short = write_config(
        out,
        r#"{"format_version": "1.0", "seed": 1,
            "scenario": {"t1_base": "off", "operating_points": [{"label": "q", "frequency": 5.0}]},
            "plan": {"cycles": 10, "cycle_period": 0.1}}"#,
    );
    assert!(pbench(&["simulate", "--config", s(&short), "--out", s(out)]).status.success());
    let result = pbench(&["analyze", "--records", s(&out.join("records.csv")), "--config", s(&short), "--out", s(out)]);
    assert_eq!(result.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&result.stderr).contains("insufficient cycles"));

    let workers = Command::new(env!("CARGO_BIN_EXE_pbench"))
        .env("PBENCH_WORKERS", "0")
        .args(["simulate", "--config", s(&short), "--out", s(out)])
        .output()
        .unwrap();
    assert_eq!(workers.status.code(), Some(2));

    std::fs::write(out.join("garbage.csv"), "not,a,records,file\n").unwrap();
    let result = pbench(&["analyze", "--records", s(&out.join("garbage.csv")), "--config", s(&short), "--out", s(out)]);
    assert_eq!(result.status.code(), Some(3));
}

#[test]
fn worker_count_does_not_change_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("telegraph_step.json");
    let mut outputs = Vec::new();
    for workers in ["1", "3"] {
        let out = dir.path().join(workers);
        std::fs::create_dir(&out).unwrap();
        let run = |args: &[&str]| {
            let status = Command::new(env!("CARGO_BIN_EXE_pbench")).env("PBENCH_WORKERS", workers).args(args).status().unwrap();
            assert!(status.success());
        };
        run(&["simulate", "--config", s(&cfg), "--out", s(&out)]);
        run(&["analyze", "--records", s(&out.join("records.csv")), "--config", s(&cfg), "--out", s(&out)]);
        outputs.push(["records.csv", "estimates.csv", "summary.json"].map(|f| std::fs::read(out.join(f)).unwrap()));
    }
    assert!(outputs[0] == outputs[1]);
}
