use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const SCALAR: &str = r#"{
  "A": [[1.0]], "B": [[1.0]], "noise_cov": [[1.0]],
  "Q": [[1.0]], "R": [[1.0]], "x0": [1.0], "episode_len": 20
}"#;

fn lqrlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lqrlab")).args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_owned()
}

#[test]
fn solve_prints_golden_ratio() {
    let dir = tempfile::tempdir().unwrap();
    let inst = write(dir.path(), "scalar.json", SCALAR);
    let out = lqrlab(&["solve", &inst]);
    assert!(out.status.success());
    let text = stdout(&out);
    let m_line = text.lines().find(|l| l.starts_with("M = ")).unwrap();
    let m: f64 = m_line.trim_start_matches("M = [[").trim_end_matches("]]").parse().unwrap();
    assert!((m - (1.0 + 5f64.sqrt()) / 2.0).abs() < 1e-9);
    assert!(text.contains("spectral_radius"));
}

#[test]
fn identify_reports_errors_and_bounds() {
    let dir = tempfile::tempdir().unwrap();
    let inst = write(dir.path(), "scalar.json", SCALAR);
    let out = lqrlab(&["identify", &inst, "--episodes", "3", "--bootstrap", "50"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    assert!(text.contains("samples = 60"));
    assert!(text.contains("eps_A = "));
}

#[test]
fn bench_then_plot() {
    let dir = tempfile::tempdir().unwrap();
    let spec = SCALAR.trim_end().trim_end_matches('}').to_owned()
        + r#", "methods": [{"name": "nominal"}, {"name": "random-search", "label": "rs"}],
        "seeds": [0, 1], "budgets": [20, 200]}"#;
    let spec = write(dir.path(), "spec.json", &spec);
    let csv = dir.path().join("out.csv");
    let out = lqrlab(&["bench", &spec, "--out", csv.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("method,seed,samples,cost,stabilized"));
    assert_eq!(lines.count(), 8);
    assert!(dir.path().join("out.config.json").exists());

    let svg = dir.path().join("plot.svg");
    let out = lqrlab(&["plot", csv.to_str().unwrap(), "--metric", "stabilization", "--out", svg.to_str().unwrap()]);
    assert!(out.status.success());
    let image = fs::read_to_string(&svg).unwrap();
    assert!(image.starts_with("<svg") || image.starts_with("<?xml"));
    assert!(image.contains("rs"));
}

#[test]
fn unknown_method_is_a_configuration_error() {
    let dir = tempfile::tempdir().unwrap();
    let spec = SCALAR.trim_end().trim_end_matches('}').to_owned()
        + r#", "methods": [{"name": "dqn"}], "seeds": [0], "budgets": [20]}"#;
    let spec = write(dir.path(), "spec.json", &spec);
    let out = lqrlab(&["bench", &spec, "--out", dir.path().join("x.csv").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!dir.path().join("x.csv").exists());
}

#[test]
fn missing_file_fails() {
    let out = lqrlab(&["solve", "/nonexistent/instance.json"]);
    assert!(!out.status.success());
}

#[test]
fn diag_variance_prints_one_row_per_dimension() {
    let out = lqrlab(&["diag", "variance", "--dims", "2..8", "--samples", "2000"]);
    assert!(out.status.success());
    let text = stdout(&out);
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 3);
    assert!(rows[0].starts_with("2,") && rows[2].starts_with("8,"));
    assert!(String::from_utf8_lossy(&out.stderr).contains("slope"));
}
