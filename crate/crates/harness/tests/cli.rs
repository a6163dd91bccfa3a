use std::fs;
use std::process::{Command, Output};

use qdcascade_harness::output::RunManifest;

fn qdcascade(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qdcascade")).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

#[test]
fn run_verb_writes_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = qdcascade(&["bin-sweep", "--out", out.to_str().unwrap(), "--temps", "20 K"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let m = RunManifest::read(&out).unwrap();
    assert_eq!(m.kind, "bin-sweep");
    assert_eq!(m.config["temperatures"], serde_json::json!([20.0]));
    assert!(m.verify(&out).unwrap().is_empty());
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("scenario.toml");
    fs::write(&cfg, "temperatures = [4.4]\nseed = 5\nout = \"from-file\"\n[tomography]\npairs = 20000\n").unwrap();
    let out = dir.path().join("from-flag");
    let o = qdcascade(&["tomography-demo", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--seed", "9"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(!dir.path().join("from-file").exists());
    let m = RunManifest::read(&out).unwrap();
    assert_eq!(m.config["seed"], 9);
    assert_eq!(m.config["tomography"]["pairs"], 20000);
    let counts = fs::read_to_string(out.join("tomo_4.4K_counts.csv")).unwrap();
    assert!(counts.lines().nth(1).unwrap().ends_with(",20000,9"));
}

#[test]
fn validate_config_prints_resolved_scenario() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("ok.toml");
    fs::write(&cfg, "kind = \"concurrence-sweep\"\n[params]\nfss = \"1 ueV\"\n[bin]\ncenter = \"1 ns\"\nwidth = \"2 ns\"\n").unwrap();
    let o = qdcascade(&["validate-config", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["kind"], "concurrence-sweep");
    assert_eq!(v["params"]["fss"], 1.0);
    assert_eq!(v["temperatures"].as_array().unwrap().len(), 76);
    assert_eq!(v["pulse"]["kind"], "stark-gaussian");
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("typo.toml");
    fs::write(&cfg, "kind = \"decay-sweep\"\n[params]\ngama_x = 4.0\n").unwrap();
    let o = qdcascade(&["validate-config", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("gama_x"));
    assert_eq!(code(&qdcascade(&["decay-sweep", "--temps", "4.4,-1"])), 2);
    assert_eq!(code(&qdcascade(&["decay-sweep", "--config", dir.path().join("missing.toml").to_str().unwrap()])), 2);
}

#[test]
fn numerical_errors_exit_with_three() {
    // a bin far in the tail of a cold cascade holds no coincidences
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("empty-bin.toml");
    fs::write(&cfg, "temperatures = [1]\n[bin]\nstart = \"12 ns\"\nwidth = \"0.5 ns\"\n").unwrap();
    let o = qdcascade(&[
        "tomography-demo",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().join("run").to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn usage_errors_are_reported() {
    assert_ne!(code(&qdcascade(&["no-such-verb"])), 0);
    assert_eq!(code(&qdcascade(&["--help"])), 0);
}
