use std::path::PathBuf;
use std::process::{Command, Output};

fn config(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)
}

fn qfsc(args: &[&str], cfg: &str) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qfsc"))
        .args(args)
        .arg("--config")
        .arg(config(cfg))
        .env_remove("QFSC_THREADS")
        .output()
        .unwrap()
}

#[test]
fn strict_vacuum_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.json");
    let o = qfsc(&["check", "--out", out.to_str().unwrap()], "fock_strict.toml");
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("not injective"));
}

#[test]
fn non_symplectic_covariance_fails_checks() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.json");
    let o = qfsc(&["check", "--out", out.to_str().unwrap()], "scaled.toml");
    assert_eq!(o.status.code(), Some(1));
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    let sym = report["checks"]
        .as_array()
        .unwrap()
        .iter()
        .find(|c| c["name"] == "phase_space.symplectic")
        .unwrap();
    assert_eq!(sym["status"], "fail");
    assert!(report["summary"]["failed"].as_u64().unwrap() > 0);
}

#[test]
fn squeezed_config_skips_gauge_only_checks() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.json");
    let o = qfsc(&["check", "--out", out.to_str().unwrap()], "squeezed.toml");
    assert_eq!(o.status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(report["summary"]["failed"], 0);
    assert_eq!(report["summary"]["skipped"], 2);
}

#[test]
fn empty_sweep_prints_header_only() {
    let o = qfsc(&["sweep", "--dimension", "bins"], "default.toml");
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(String::from_utf8_lossy(&o.stdout).trim(), "bins,cutoff,quantity,value");
}

#[test]
fn bad_sweep_value_is_a_usage_error() {
    let o = qfsc(&["sweep", "--dimension", "cutoff", "--values", "4,x"], "default.toml");
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn expect_reports_exact_and_truncated_values() {
    let o = qfsc(&["expect", "--word", "W(f)* W(f)"], "default.toml");
    assert_eq!(o.status.code(), Some(0));
    assert!(!o.stdout.is_empty());
}

#[test]
fn expect_rejects_unbound_names() {
    let o = qfsc(&["expect", "--word", "W(h)"], "default.toml");
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn modular_prints_for_gauge_config() {
    let o = qfsc(&["modular"], "default.toml");
    assert_eq!(o.status.code(), Some(0));
    assert!(!o.stdout.is_empty());
}

#[test]
fn invalid_thread_count_is_rejected() {
    let o = Command::new(env!("CARGO_BIN_EXE_qfsc"))
        .args(["modular", "--config"])
        .arg(config("default.toml"))
        .env("QFSC_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}
