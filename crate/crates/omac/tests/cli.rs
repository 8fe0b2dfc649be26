mod common;

use std::process::Command;

fn omac() -> Command {
    Command::new(env!("CARGO_BIN_EXE_omac"))
}

#[test]
fn malformed_config_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(&path, "[run]\nname = 3\n").unwrap();
    let out = omac().args(["run", "--config"]).arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn empty_seed_override_is_a_config_error() {
    let out = omac()
        .args(["run", "--seeds", "", "--config"])
        .arg(common::config_path("pendulum.toml"))
        .output()
        .unwrap();
    assert_ne!(out.status.code(), Some(0));
}

#[test]
fn kronecker_suite_passes() {
    let out = omac().args(["check", "--suite", "kronecker"]).output().unwrap();
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("PASS"));
}

#[test]
fn run_then_export() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("small.toml");
    std::fs::write(&cfg_path, common::small_pendulum().to_toml()).unwrap();
    let out_dir = dir.path().join("out");
    let out = omac()
        .env("OMAC_WORKERS", "2")
        .args(["run", "--seeds", "3", "--config"])
        .arg(&cfg_path)
        .arg("--out")
        .arg(&out_dir)
        .output()
        .unwrap();
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(out.status.success(), "{stdout}");
    assert!(stdout.contains("omniscient"));
    for f in ["ace.csv", "summary.json", "metrics_seed3.csv", "logs/no-adapt_seed3.csv"] {
        assert!(out_dir.join(f).exists(), "missing {f}");
    }

    let out = omac().args(["export", "--report"]).arg(&out_dir).output().unwrap();
    assert!(out.status.success());
    let curves = std::fs::read_to_string(out_dir.join("curves.csv")).unwrap();
    assert!(curves.starts_with("controller,seed,i,metric,value"));
}
