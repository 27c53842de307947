use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_chainfl"))
}

const SMALL: &str = "rounds = 3\nn_clients = 10\nattack_mode = \"benign\"\ndefense = false\n\n[task]\ntrain = 2000\ntest = 300\n";

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("s.toml");
    std::fs::write(&cfg, SMALL).unwrap();
    let out_csv = dir.path().join("m.csv");
    let ledger = dir.path().join("l.jsonl");
    let status = bin()
        .args(["run", "--config"])
        .arg(&cfg)
        .args(["--rounds", "1", "--seed", "4", "--out"])
        .arg(&out_csv)
        .arg("--ledger")
        .arg(&ledger)
        .status()
        .unwrap();
    assert!(status.success());
    let csv = std::fs::read_to_string(&out_csv).unwrap();
    assert_eq!(csv.lines().count(), 2, "{csv}");
    assert!(csv.starts_with("round,MA,BA,TPR,TNR,R_C"));
    assert!(std::fs::read_to_string(&ledger).unwrap().lines().count() > 10);
}

#[test]
fn json_goes_to_stdout() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("s.toml");
    std::fs::write(&cfg, SMALL).unwrap();
    let out = bin()
        .args(["run", "--rounds", "1", "--format", "json", "--config"])
        .arg(&cfg)
        .output()
        .unwrap();
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v.as_array().unwrap().len(), 1);
}

#[test]
fn bad_config_reports_json_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "rounds = 0\n").unwrap();
    let out = bin().args(["run", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert!(err["error"].is_string());
    assert!(err["message"].as_str().unwrap().contains("rounds"));

    let out = bin().args(["run", "--config", "/nonexistent/x.toml"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unknown_attack_is_a_usage_error() {
    let out = bin().args(["run", "--attack", "sybil"]).output().unwrap();
    assert!(!out.status.success());
}
