use std::path::Path;
use std::process::Command as Process;

use qbm::config::{Command, parse_config, parse_str};
use qbm::runner::run;
use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_qbm");

fn write(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn report(path: &Path) -> Value {
    serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap()
}

fn gillespie_config(dir: &Path, seed: u64, out: &str) -> qbm::config::ExperimentConfig {
    let text = format!("seed = {seed}\nout_dir = {:?}\n[gillespie]\ntrajectories = 2000\n", dir.join(out));
    parse_str(&text, "gillespie.toml").unwrap().validate().unwrap()
}

#[test]
fn minimal_file_parses_from_disk() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(dir.path(), "min.toml", "seed = 1\n");
    let config = parse_config(&path, Some(Command::Gillespie)).unwrap();
    assert_eq!(config.seed, Some(1));
}

#[test]
fn missing_seed_names_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(dir.path(), "noseed.toml", "alpha = 2\n");
    let err = parse_config(&path, Some(Command::Gillespie)).unwrap_err();
    assert!(err.issues().iter().any(|i| i.starts_with("seed:")), "{err}");
}

#[test]
fn certify_writes_a_passing_report() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!("out_dir = {:?}\n", dir.path());
    let config = parse_str(&text, "certify.toml").unwrap().validate().unwrap();
    let outcome = run(Command::Certify, &config).unwrap();
    assert_eq!(outcome.pass, Some(true));
    let doc = report(&outcome.report);
    assert_eq!(doc["pass"], Value::Bool(true));
    assert_eq!(doc["command"], "certify");
    assert_eq!(doc["config_sha256"], config.hash());
    assert!(doc["result"]["min_eigenvalue"].as_f64().unwrap() >= -1e-8);
}

#[test]
fn same_seed_reproduces_the_summary() {
    let dir = tempfile::tempdir().unwrap();
    let a = run(Command::Gillespie, &gillespie_config(dir.path(), 7, "a")).unwrap();
    let b = run(Command::Gillespie, &gillespie_config(dir.path(), 7, "a2")).unwrap();
    // The output directory is not part of the config hash.
    assert_eq!(std::fs::read(&a.report).unwrap(), std::fs::read(&b.report).unwrap());
}

#[test]
fn different_seeds_agree_statistically() {
    let dir = tempfile::tempdir().unwrap();
    let a = report(&run(Command::Gillespie, &gillespie_config(dir.path(), 1, "a")).unwrap().report);
    let b = report(&run(Command::Gillespie, &gillespie_config(dir.path(), 2, "b")).unwrap().report);
    assert_ne!(a["result"]["level_fractions"], b["result"]["level_fractions"]);
    let p = |d: &Value, k: &str| d["result"][k][1].as_f64().unwrap();
    let sigma = (p(&a, "level_stderr").powi(2) + p(&b, "level_stderr").powi(2)).sqrt();
    let gap = (p(&a, "level_fractions") - p(&b, "level_fractions")).abs();
    assert!(gap < 3.0 * sigma, "{gap} vs 3σ = {}", 3.0 * sigma);
}

#[test]
fn csv_artifacts_carry_the_stamp() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!("out_dir = {:?}\n", dir.path());
    let config = parse_str(&text, "c.toml").unwrap().validate().unwrap();
    let outcome = run(Command::Correlations, &config).unwrap();
    let csv = std::fs::read_to_string(dir.path().join("correlations_thermal.csv")).unwrap();
    let mut lines = csv.lines();
    assert!(lines.next().unwrap().contains(&config.hash()));
    assert_eq!(lines.next().unwrap(), "x1,x2,t,re_f,im_f");
    // Only the named artifacts remain; no temp files.
    let mut names: Vec<String> =
        std::fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    names.sort();
    assert_eq!(names, ["correlations.json", "correlations_thermal.csv"]);
    assert_eq!(outcome.artifacts.len(), 2);
}

#[test]
fn binary_reports_config_errors_as_json() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(dir.path(), "bad.toml", "alpha = 1.5\n");
    let out = dir.path().join("out");
    let status = Process::new(BIN)
        .args(["--config", path.to_str().unwrap(), "--out-dir", out.to_str().unwrap(), "certify"])
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(2));
    let doc = report(&out.join("certify.error.json"));
    assert_eq!(doc["result"]["kind"], "config");
    let message = doc["result"]["message"].as_str().unwrap();
    assert!(message.contains("\"inf\""), "{message}");

    let status = Process::new(BIN).args(["--out-dir", out.to_str().unwrap(), "gillespie"]).output().unwrap();
    assert_eq!(status.status.code(), Some(2));
    let doc = report(&out.join("gillespie.error.json"));
    assert!(doc["result"]["issues"][0].as_str().unwrap().starts_with("seed"));
}

#[test]
fn binary_output_does_not_depend_on_threads() {
    let dir = tempfile::tempdir().unwrap();
    let run_with = |threads: &str, out: &str| {
        let out = dir.path().join(out);
        let status = Process::new(BIN)
            .args(["--seed", "3", "--threads", threads, "--out-dir", out.to_str().unwrap()])
            .args(["gillespie", "--n-traj", "500"])
            .status()
            .unwrap();
        // 3 marks a failed TV check at this sample size; the report is still written.
        assert!(matches!(status.code(), Some(0 | 3)), "{status}");
        std::fs::read_to_string(out.join("gillespie.json")).unwrap()
    };
    let one: Value = serde_json::from_str(&run_with("1", "one")).unwrap();
    let three: Value = serde_json::from_str(&run_with("3", "three")).unwrap();
    assert_eq!(one["result"], three["result"]);
}
