//! Browser bindings. Every export takes plain numbers and returns a JSON
//! string, so the page needs no generated TypeScript types.
//!
//! Both species use `mu(x) = mean + amp sin(2 pi x)` on a unit period with
//! zero levels `a1 = a2 = 1`.

use pulsefront::analysis::{estimate_speed_from_log, SpeedConfig};
use pulsefront::experiment::{simulate_front, GridSpec, RunSpec, SeedSpec};
use pulsefront::sim::{snapshot_around, SystemParams};
use pulsefront::theta::{predict_sign_from, PairAnalysis};
use pulsefront::{FourierSeries, PeriodicReaction};
use serde::Serialize;
use wasm_bindgen::prelude::*;

fn reaction(mean: f64, amp: f64) -> pulsefront::Result<PeriodicReaction> {
    PeriodicReaction::logistic(
        FourierSeries {
            period: 1.0,
            mean,
            cosine: vec![],
            sine: vec![amp],
        },
        1.0,
    )
}

#[derive(Serialize)]
struct Profile {
    x: Vec<f64>,
    a: Vec<f64>,
    r0: (f64, f64),
    r_lo: f64,
    r_hi: f64,
}

/// Threshold profile `A_d(x)` and the ratio intervals.
pub fn profile_json(mu1: (f64, f64), mu2: (f64, f64), d: f64) -> Result<String, String> {
    let run = || -> pulsefront::Result<Profile> {
        let a = PairAnalysis::with_resolution(
            d,
            &reaction(mu1.0, mu1.1)?,
            &reaction(mu2.0, mu2.1)?,
            48,
        )?;
        Ok(Profile {
            x: a.profile.x_samples,
            a: a.profile.a_values,
            r0: a.r0,
            r_lo: a.r_lo,
            r_hi: a.r_hi,
        })
    };
    run()
        .map_err(|e| e.to_string())
        .and_then(|p| serde_json::to_string(&p).map_err(|e| e.to_string()))
}

/// Predicted sign of the limiting speed for each `alpha`.
pub fn predict_json(
    mu1: (f64, f64),
    mu2: (f64, f64),
    d: f64,
    alphas: &[f64],
) -> Result<String, String> {
    let run = || -> pulsefront::Result<Vec<pulsefront::theta::SignReport>> {
        let (r1, r2) = (reaction(mu1.0, mu1.1)?, reaction(mu2.0, mu2.1)?);
        let a = PairAnalysis::with_resolution(d, &r1, &r2, 48)?;
        alphas
            .iter()
            .map(|&al| predict_sign_from(&a, al, &r1, &r2))
            .collect()
    };
    run()
        .map_err(|e| e.to_string())
        .and_then(|p| serde_json::to_string(&p).map_err(|e| e.to_string()))
}

#[derive(Serialize)]
struct SimResult {
    t: f64,
    x: Vec<f64>,
    u1: Vec<f64>,
    u2: Vec<f64>,
    v_d: Vec<f64>,
    speed: Option<f64>,
    stderr: Option<f64>,
}

/// A short front simulation: final profiles near the interface and the speed
/// fitted so far (absent when the run is too short to fit).
pub fn simulate_json(
    mu1: (f64, f64),
    mu2: (f64, f64),
    d: f64,
    alpha: f64,
    k: f64,
    horizon: f64,
) -> Result<String, String> {
    let run = || -> pulsefront::Result<SimResult> {
        let params = SystemParams::new(
            d,
            alpha,
            k,
            reaction(mu1.0, mu1.1)?,
            reaction(mu2.0, mu2.1)?,
        )?;
        let grid = GridSpec {
            nodes_per_period: 64,
            periods: 24,
        };
        let run = RunSpec {
            horizon,
            max_horizon: horizon,
            ..RunSpec::default()
        };
        let fr = simulate_front(
            &params,
            &grid,
            &run,
            &SeedSpec {
                width: 1.0,
                offset: 0.0,
            },
            None,
        )?;
        let centre = fr.crossings.last().map_or(0.0, |c| c.u1_level);
        let snap = snapshot_around(&fr.state, centre, 4);
        let est = estimate_speed_from_log(&fr.crossings, &SpeedConfig::new(1.0)).ok();
        let x: Vec<f64> = (0..snap.u1.len()).map(|i| snap.x(i)).collect();
        let v_d = snap
            .u1
            .iter()
            .zip(&snap.u2)
            .map(|(a, b)| alpha * a - d * b)
            .collect();
        Ok(SimResult {
            t: snap.t,
            x,
            u1: snap.u1,
            u2: snap.u2,
            v_d,
            speed: est.map(|e| e.0.c),
            stderr: est.map(|e| e.0.stderr),
        })
    };
    run()
        .map_err(|e| e.to_string())
        .and_then(|p| serde_json::to_string(&p).map_err(|e| e.to_string()))
}

#[wasm_bindgen]
pub fn threshold_profile(
    mu1_mean: f64,
    mu1_amp: f64,
    mu2_mean: f64,
    mu2_amp: f64,
    d: f64,
) -> Result<String, JsError> {
    profile_json((mu1_mean, mu1_amp), (mu2_mean, mu2_amp), d).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn predict_signs(
    mu1_mean: f64,
    mu1_amp: f64,
    mu2_mean: f64,
    mu2_amp: f64,
    d: f64,
    alphas: Vec<f64>,
) -> Result<String, JsError> {
    predict_json((mu1_mean, mu1_amp), (mu2_mean, mu2_amp), d, &alphas).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn simulate(
    mu1_mean: f64,
    mu1_amp: f64,
    mu2_mean: f64,
    mu2_amp: f64,
    d: f64,
    alpha: f64,
    k: f64,
    horizon: f64,
) -> Result<String, JsError> {
    simulate_json(
        (mu1_mean, mu1_amp),
        (mu2_mean, mu2_amp),
        d,
        alpha,
        k,
        horizon,
    )
    .map_err(|e| JsError::new(&e))
}
