mod common;

use std::path::Path;
use std::process::{Command, Output};

use common::config_path;
use tempfile::TempDir;

fn sampmodel(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sampmodel")).args(args).output().unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write(dir: &TempDir, name: &str, body: &str) -> String {
    let p = dir.path().join(name);
    std::fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

/// `value` column of the first result row for `estimator`.
fn estimate_value(csv: &str, estimator: &str) -> f64 {
    let mut rdr = csv::Reader::from_reader(csv.as_bytes());
    let headers = rdr.headers().unwrap().clone();
    let col = headers.iter().position(|h| h == "value").unwrap();
    rdr.records()
        .map(|r| r.unwrap())
        .find(|r| &r[0] == estimator)
        .map(|r| r[col].parse().unwrap())
        .unwrap()
}

#[test]
fn missing_config_is_an_input_error() {
    let out = sampmodel(&["simulate", "--config", "/nonexistent/config.json"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty());
}

#[test]
fn malformed_config_is_an_input_error() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "bad.json", "{ \"population\": ");
    assert_eq!(sampmodel(&["simulate", "--config", &cfg]).status.code(), Some(2));
    let cfg = write(&dir, "unknown.json", "{ \"replications\": 3, \"colour\": 1 }");
    assert_eq!(sampmodel(&["simulate", "--config", &cfg]).status.code(), Some(2));
}

#[test]
fn exact_reports_tilted_coin() {
    let out = sampmodel(&["exact", "--config", path(&config_path("exact_coin.json"))]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    let fs = &v["sample_pdf"];
    assert!((fs[0][0].as_f64().unwrap() - 1.0 / 3.0).abs() < 1e-12);
    assert!((fs[1][0].as_f64().unwrap() - 2.0 / 3.0).abs() < 1e-12);
    let fc = &v["complement_pdf"];
    assert!((fc[0][0].as_f64().unwrap() - 4.0 / 7.0).abs() < 1e-12);
    assert_eq!(v["ignorable"], false);
    assert_eq!(v["passed"], true);
}

#[test]
fn exact_flags_ignorable_design() {
    let out = sampmodel(&["exact", "--config", path(&config_path("exact_ignorable.json"))]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["ignorable"], true);
}

#[test]
fn exact_rejects_unnormalized_table() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        &dir,
        "bad.json",
        r#"{ "y_support": [0, 1], "z_support": [[0]], "p": [[0.5], [0.4]], "pi": [[0.2], [0.4]] }"#,
    );
    assert_eq!(sampmodel(&["exact", "--config", &cfg]).status.code(), Some(2));
}

#[test]
fn estimate_hajek_by_hand() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "s.csv", "y,w,z_1\n2,1,0\n4,3,1\n");
    let out = sampmodel(&["estimate", "--input", &input, "--estimators", "hajek,sample_mean"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    assert!((estimate_value(&text, "hajek") - 3.5).abs() < 1e-12);
    assert!((estimate_value(&text, "sample_mean") - 3.0).abs() < 1e-12);
}

#[test]
fn estimate_equal_weights_give_plain_mean() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "s.csv", "y,w,z_1\n1,5,0\n2,5,1\n6,5,0\n");
    let out = sampmodel(&["estimate", "--input", &input, "--out", path(dir.path())]);
    assert_eq!(out.status.code(), Some(0));
    assert!((estimate_value(&stdout(&out), "hajek") - 3.0).abs() < 1e-12);
    let saved = std::fs::read_to_string(dir.path().join("estimates.csv")).unwrap();
    assert_eq!(saved, stdout(&out));
}

#[test]
fn estimate_without_weights_is_an_input_error() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "s.csv", "y,z_1\n2,0\n4,1\n");
    let out = sampmodel(&["estimate", "--input", &input, "--estimators", "hajek"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains('w'));
    // unweighted estimators still run
    let out = sampmodel(&["estimate", "--input", &input, "--estimators", "sample_mean"]);
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn simulate_census_has_zero_bias_and_is_reproducible() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    let cfg = config_path("census.json");
    for dir in [&a, &b] {
        let out = sampmodel(&["simulate", "--config", path(&cfg), "--out", path(dir.path()), "--reps", "3"]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    }
    for name in ["replications.csv", "summary.csv", "config.json"] {
        let x = std::fs::read(a.path().join(name)).unwrap();
        let y = std::fs::read(b.path().join(name)).unwrap();
        assert_eq!(x, y, "{name} differs");
    }
    let mut rdr = csv::Reader::from_path(a.path().join("summary.csv")).unwrap();
    let headers = rdr.headers().unwrap().clone();
    let bias = headers.iter().position(|h| h == "bias").unwrap();
    for rec in rdr.records() {
        let rec = rec.unwrap();
        let v: f64 = rec[bias].parse().unwrap();
        assert!(v.abs() < 1e-9, "{} {}: {v}", &rec[0], &rec[1]);
    }
}

#[test]
fn simulate_seed_override_changes_output() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    let cfg = config_path("nmar.json");
    for (dir, seed) in [(&a, "1"), (&b, "2")] {
        let out = sampmodel(&["simulate", "--config", path(&cfg), "--out", path(dir.path()), "--reps", "5", "--seed", seed]);
        assert_eq!(out.status.code(), Some(0));
    }
    let x = std::fs::read(a.path().join("replications.csv")).unwrap();
    let y = std::fs::read(b.path().join("replications.csv")).unwrap();
    assert_ne!(x, y);
}

#[test]
fn unknown_estimator_is_an_input_error() {
    let out = sampmodel(&["simulate", "--config", path(&config_path("census.json")), "--estimators", "median"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn draw_writes_population_and_sample() {
    let dir = TempDir::new().unwrap();
    let out = sampmodel(&["draw", "--config", path(&config_path("reference.json")), "--out", path(dir.path())]);
    assert_eq!(out.status.code(), Some(0));
    let pop = std::fs::read_to_string(dir.path().join("population.csv")).unwrap();
    assert_eq!(pop.lines().count(), 20_001);
    let sample = dir.path().join("sample.csv");
    let est = sampmodel(&["estimate", "--input", path(&sample), "--estimators", "hajek,bw"]);
    assert_eq!(est.status.code(), Some(0), "{}", String::from_utf8_lossy(&est.stderr));
}
