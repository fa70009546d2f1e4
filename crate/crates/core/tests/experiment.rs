use std::path::PathBuf;

use pulsefront::experiment::{
    emit_report, run_check, run_predictions, run_sweep, LoadedConfig, Overrides,
};

fn quick() -> LoadedConfig {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs/quick.toml");
    LoadedConfig::load(&path).unwrap()
}

#[test]
fn sweep_emits_all_tables() {
    let loaded = quick();
    let mut report = run_sweep(&loaded).unwrap();
    assert_eq!(report.records.len(), 4);
    assert!(
        report.records.iter().all(|r| r.error.is_none()),
        "{:?}",
        report.records.iter().map(|r| &r.error).collect::<Vec<_>>()
    );
    let point = &report.points[0];
    assert_eq!(point.prediction.predicted.label(), "positive");
    assert_eq!(point.measured_sign, Some(1));
    assert_eq!(point.agree, Some(true));
    assert!(point.limit.is_some());
    assert_eq!(point.seeds_agree, Some(true));
    for name in [
        "sign_agreement",
        "speed_bracket",
        "clamp_budget",
        "runs_completed",
        "speed_uniqueness",
        "segregation_decreasing",
    ] {
        let v = report
            .verdict(name)
            .unwrap_or_else(|| panic!("missing verdict {name}"));
        assert!(v.passed, "{name}: {}", v.detail);
    }

    let dir = tempfile::tempdir().unwrap();
    let files = emit_report(&mut report, &loaded.source, dir.path()).unwrap();
    for name in [
        "config.toml",
        "config.sha256",
        "summary.csv",
        "prediction.csv",
        "predictions.csv",
        "verdicts.csv",
        "front_report.json",
        "speed_vs_inv_k.svg",
        "phase_diagram.svg",
    ] {
        assert!(files.contains(&dir.path().join(name)), "{name} not written");
    }
    let pred = std::fs::read_to_string(dir.path().join("prediction.csv")).unwrap();
    assert!(pred.starts_with("d,alpha,ratio,r_lo,r0_min,r0_max,r_hi,integral,predicted\n"));
    let summary = std::fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 5);
    assert!(summary.lines().skip(1).all(|l| l.starts_with(&loaded.hash)));
    let snaps: Vec<_> = files
        .iter()
        .filter(|p| {
            p.file_name()
                .unwrap()
                .to_string_lossy()
                .starts_with("snap_t")
        })
        .collect();
    assert_eq!(snaps.len(), 4);
    let snap = std::fs::read_to_string(snaps[0]).unwrap();
    assert!(snap.starts_with("t,x,u1,u2,v_d\n"));
    let json: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("front_report.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(json["config_hash"], loaded.hash.as_str());
    assert!(json["records"][0]["artifacts"].as_array().unwrap().len() >= 2);
}

#[test]
fn overrides_change_the_run_but_not_the_hash() {
    let base = quick();
    let hash = base.hash.clone();
    let o = base.with_overrides(Overrides {
        workers: Some(1),
        resolution: Some(96),
        horizon: Some(100.0),
    });
    assert_eq!(o.hash, hash);
    assert_eq!(o.config.grid.nodes_per_period, 96);
    assert_eq!(o.config.run.workers, 1);
    assert_eq!(o.config.run.horizon, 100.0);
    assert_eq!(o.config.run.max_horizon, 160.0);
}

#[test]
fn predict_and_check_paths() {
    let loaded = quick();
    let p = run_predictions(&loaded).unwrap();
    assert_eq!(p.reports.len(), 1);
    assert!(p.verdicts.iter().all(|v| v.passed));
    let c = run_check(&loaded).unwrap();
    assert!(c.verdicts.iter().all(|v| v.passed), "{:?}", c.verdicts);
    assert_eq!(c.d_exis, 0.0);
    assert!(c.h_freq[0].1);
}

#[test]
fn sweep_refuses_non_bistable_schedule() {
    let src = std::fs::read_to_string(
        PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs/quick.toml"),
    )
    .unwrap()
    .replace("k_schedule = [25.0, 50.0]", "k_schedule = [0.5, 50.0]");
    let loaded = LoadedConfig::from_toml_str(&src).unwrap();
    assert!(run_sweep(&loaded).is_err());
    let c = run_check(&loaded).unwrap();
    assert!(
        !c.verdicts
            .iter()
            .find(|v| v.name == "k_schedule_above_bistable")
            .unwrap()
            .passed
    );
}
