use std::path::{Path, PathBuf};
use std::process::Command;

fn configs() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn pulsefront() -> Command {
    Command::new(env!("CARGO_BIN_EXE_pulsefront"))
}

fn write_config(dir: &Path, replace: (&str, &str)) -> PathBuf {
    let src = std::fs::read_to_string(configs().join("quick.toml"))
        .unwrap()
        .replace(replace.0, replace.1);
    let path = dir.join("cfg.toml");
    std::fs::write(&path, src).unwrap();
    path
}

#[test]
fn predict_writes_tables_and_exits_zero() {
    let out = tempfile::tempdir().unwrap();
    let status = pulsefront()
        .args([
            "predict",
            configs().join("quick.toml").to_str().unwrap(),
            "--out",
        ])
        .arg(out.path())
        .status()
        .unwrap();
    assert!(status.success());
    let pred = std::fs::read_to_string(out.path().join("prediction.csv")).unwrap();
    let mut lines = pred.lines();
    assert_eq!(
        lines.next().unwrap(),
        "d,alpha,ratio,r_lo,r0_min,r0_max,r_hi,integral,predicted"
    );
    assert!(lines.next().unwrap().ends_with(",positive"));
    let hash = std::fs::read_to_string(out.path().join("config.sha256")).unwrap();
    assert_eq!(hash.split_whitespace().next().unwrap().len(), 64);
}

#[test]
fn output_directory_from_environment() {
    let out = tempfile::tempdir().unwrap();
    let status = pulsefront()
        .args(["check", configs().join("quick.toml").to_str().unwrap()])
        .env("PULSEFRONT_OUT", out.path())
        .status()
        .unwrap();
    assert!(status.success());
    assert!(out.path().join("check_report.json").exists());
    assert!(out.path().join("verdicts.csv").exists());
}

#[test]
fn failing_verdict_gives_nonzero_exit() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        ("k_schedule = [25.0, 50.0]", "k_schedule = [1.0, 50.0]"),
    );
    let status = pulsefront()
        .arg("check")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path().join("o"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(1));
    let v = std::fs::read_to_string(dir.path().join("o/verdicts.csv")).unwrap();
    assert!(v
        .lines()
        .any(|l| l.contains("k_schedule_above_bistable,false")));
}

#[test]
fn malformed_config_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        ("name = \"quick\"", "name = \"quick\"\nunknown_key = 1"),
    );
    let out = pulsefront()
        .arg("predict")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown_key"));
}

#[test]
fn run_with_overrides_produces_reports() {
    let out = tempfile::tempdir().unwrap();
    let output = pulsefront()
        .args([
            "run",
            configs().join("quick.toml").to_str().unwrap(),
            "--resolution",
            "64",
            "--horizon",
            "10",
            "--workers",
            "1",
            "--out",
        ])
        .arg(out.path())
        .output()
        .unwrap();
    assert!(output.status.code().is_some_and(|c| c == 0 || c == 1));
    for f in [
        "summary.csv",
        "predictions.csv",
        "verdicts.csv",
        "front_report.json",
        "phase_diagram.svg",
    ] {
        assert!(out.path().join(f).exists(), "{f}");
    }
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.lines().any(|l| l.starts_with("PASS sign_agreement")));
}
