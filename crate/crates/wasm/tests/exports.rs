use pulsefront_wasm::{predict_json, profile_json, simulate_json};
use serde_json::Value;

#[test]
fn homogeneous_profile_is_flat() {
    let v: Value =
        serde_json::from_str(&profile_json((1.0, 0.0), (2.0, 0.0), 2.0).unwrap()).unwrap();
    // sqrt(d mu2 / mu1) = 2
    for a in v["a"].as_array().unwrap() {
        assert!((a.as_f64().unwrap() - 2.0).abs() < 1e-4);
    }
    assert!((v["r0"][0].as_f64().unwrap() - 2.0).abs() < 1e-3);
}

#[test]
fn predicted_signs_follow_the_ratio() {
    let v: Value =
        serde_json::from_str(&predict_json((1.0, 0.5), (1.0, 0.25), 1.0, &[0.5, 2.0]).unwrap())
            .unwrap();
    let labels: Vec<&str> = v
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["predicted"].as_str().unwrap())
        .collect();
    assert_eq!(labels, ["negative", "positive"]);
}

#[test]
fn short_simulation_reports_profiles() {
    let v: Value = serde_json::from_str(
        &simulate_json((1.0, 0.5), (1.0, 0.25), 1.0, 2.0, 50.0, 30.0).unwrap(),
    )
    .unwrap();
    let n = v["x"].as_array().unwrap().len();
    assert!(
        n > 100
            && v["u1"].as_array().unwrap().len() == n
            && v["v_d"].as_array().unwrap().len() == n
    );
    assert!(v["speed"].as_f64().unwrap() > 0.0);
}

#[test]
fn bad_input_is_an_error() {
    assert!(profile_json((-1.0, 0.0), (1.0, 0.0), 1.0).is_err());
    assert!(simulate_json((1.0, 0.0), (1.0, 0.0), -1.0, 1.0, 50.0, 5.0).is_err());
}
