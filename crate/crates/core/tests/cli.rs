use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn focksep(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_focksep"))
        .args(args)
        .current_dir(dir)
        .env_remove("FOCKSEP_CACHE_DIR")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, text: &str) {
    std::fs::write(dir.join("run.json"), text).unwrap();
}

#[test]
fn rho_from_a_bare_weight_document() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path(), r#"{"kind": "power", "alpha": 2}"#);
    let out = focksep(&["rho", "--config", "run.json", "--out", "o"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let doc: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("o/rho.json")).unwrap()).unwrap();
    assert_eq!(doc["schema_version"], 1);
    assert_eq!(doc["report"], "rho");
    for row in doc["data"]["rows"].as_array().unwrap() {
        let rho = row["rho"].as_f64().unwrap();
        assert!((rho - 0.5 / std::f64::consts::PI.sqrt()).abs() < 1e-8);
    }
}

#[test]
fn seed_flag_changes_samples_and_reruns_repeat_them() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path(), r#"{"weight": {"kind": "power", "alpha": 1}, "sample": {"window_r": 6}}"#);
    let mut texts = Vec::new();
    for (seed, sub) in [("1", "a"), ("1", "b"), ("2", "c")] {
        let out = focksep(&["sample", "--config", "run.json", "--seed", seed, "--out", sub, "--format", "csv"], dir.path());
        assert_eq!(out.status.code(), Some(0));
        texts.push(std::fs::read(dir.path().join(sub).join("sample.csv")).unwrap());
    }
    assert_eq!(texts[0], texts[1]);
    assert_ne!(texts[0], texts[2]);
}

#[test]
fn sample_writes_jsonl_and_svg() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path(), r#"{"weight": {"kind": "power", "alpha": 1}, "sample": {"window_r": 5, "kind": "poisson"}}"#);
    assert_eq!(focksep(&["sample", "--config", "run.json", "--out", "o"], dir.path()).status.code(), Some(0));
    let jsonl = std::fs::read_to_string(dir.path().join("o/sample.jsonl")).unwrap();
    for line in jsonl.lines() {
        let p: Value = serde_json::from_str(line).unwrap();
        assert!(p["modulus"].as_f64().unwrap() <= 5.0);
    }
    assert_eq!(focksep(&["sample", "--config", "run.json", "--out", "o", "--format", "svg"], dir.path()).status.code(), Some(0));
    let svg = std::fs::read_to_string(dir.path().join("o/sample.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.contains("<circle"));
}

#[test]
fn errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path(), r#"{"weight": {"kind": "power", "alpha": -1}}"#);
    let out = focksep(&["classify", "--config", "run.json"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("/weight/alpha"));

    write_config(dir.path(), r#"{"kind": "power", "alpha": 1}"#);
    let out = focksep(&["rho", "--config", "run.json", "--format", "svg", "--out", "o"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unsupported format"));

    assert_eq!(focksep(&["rho"], dir.path()).status.code(), Some(1));
    assert_eq!(focksep(&["no-such-command"], dir.path()).status.code(), Some(1));
    assert_eq!(focksep(&["rho", "--config", "missing.json"], dir.path()).status.code(), Some(1));
}

#[test]
fn verify_passes_its_required_checks() {
    let dir = tempfile::tempdir().unwrap();
    let out = focksep(&["verify", "--out", "o"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let doc: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("o/verify.json")).unwrap()).unwrap();
    assert_eq!(doc["data"]["passed"], true);
    let checks = doc["data"]["checks"].as_array().unwrap();
    assert!(checks.len() >= 10);
    assert!(checks.iter().any(|c| c["required"] == false));
}

#[test]
fn zero_one_svg_has_one_figure_per_window() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path(), r#"{"weight": {"kind": "power", "alpha": 1.5}, "zero_one": {"r_list": [5, 10], "trials": 4}}"#);
    let out = focksep(&["zero-one", "--config", "run.json", "--out", "o", "--format", "svg"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    for r in ["5", "10"] {
        assert!(dir.path().join(format!("o/zero_one_R{r}.svg")).exists());
    }
}

#[test]
fn emitted_config_parses_back() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = focksep::config::parse_config(r#"{"weight": {"kind": "power", "alpha": 0.75}, "seed": 8, "collide": {"scales": [1, 3]}}"#).unwrap();
    let path = dir.path().join("emitted.json");
    std::fs::write(&path, cfg.to_json().unwrap()).unwrap();
    let back = focksep::config::parse_config(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(back, cfg);
    let out = focksep(&["rho", "--config", "emitted.json", "--out", "o"], dir.path());
    assert_eq!(out.status.code(), Some(0));
}
