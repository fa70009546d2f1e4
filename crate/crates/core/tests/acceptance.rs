//! Acceptance runner: one PASS/FAIL line per criterion, nonzero exit on any failure.
//!
//! Simulation outputs are kept under `target/acceptance/` for inspection.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use pulsefront::error::Error;
use pulsefront::experiment::{
    emit_predictions, emit_report, run_predictions, run_sweep, ExperimentReport, LoadedConfig,
};
use pulsefront::reaction::{validate_hypotheses, Sampling};
use pulsefront::scalar_kpp::{minimal_speed, speed_bracket};
use pulsefront::theta::{a_profile, build_equilibrium, theta, PairAnalysis};
use pulsefront::{FourierSeries, PeriodicReaction};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn homogeneous(mu: f64, a: f64) -> PeriodicReaction {
    PeriodicReaction::homogeneous(mu, a, 1.0).unwrap()
}

fn workspace() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn out_dir(name: &str) -> PathBuf {
    let base = std::env::var_os("CARGO_TARGET_DIR")
        .map_or_else(|| workspace().join("target"), PathBuf::from);
    base.join("acceptance").join(name)
}

fn load(name: &str) -> LoadedConfig {
    LoadedConfig::load(&workspace().join("configs").join(name)).unwrap()
}

fn theta_homogeneous() -> Outcome {
    let mut worst: f64 = 0.0;
    for (mu, a) in [(1.0, 1.0), (3.0, 2.0), (0.5, 1.0)] {
        let r = homogeneous(mu, a);
        let oracle = (mu * a * a * a / 3.0_f64).sqrt();
        for x0 in [0.0, 0.3, 0.7] {
            worst = worst.max(rel(theta(x0, &r).map_err(|e| e.to_string())?, oracle));
        }
    }
    check(
        worst < 1e-5,
        format!("max relative error {worst:.2e} (tolerance 1e-5)"),
    )
}

fn theta_scaling() -> Outcome {
    let r = PeriodicReaction::logistic(
        FourierSeries {
            period: 1.0,
            mean: 2.0,
            cosine: vec![],
            sine: vec![1.0],
        },
        1.0,
    )
    .unwrap();
    let mut worst: f64 = 0.0;
    for x0 in [0.0, 0.25, 0.6] {
        let base = theta(x0, &r).map_err(|e| e.to_string())?;
        for kappa in [0.5, 2.0, 10.0] {
            let scaled = theta(x0, &r.rescale(kappa).unwrap()).map_err(|e| e.to_string())?;
            worst = worst.max(rel(scaled, kappa * base));
        }
    }
    check(
        worst < 1e-5,
        format!("max relative error {worst:.2e} (tolerance 1e-5)"),
    )
}

fn homogeneous_reduction() -> Outcome {
    let start = Instant::now();
    let mut worst_a: f64 = 0.0;
    let mut worst_r0: f64 = 0.0;
    for (mu1, mu2, d) in [(1.0, 1.0, 1.0), (1.0, 2.0, 0.5), (2.0, 0.5, 3.0)] {
        let (r1, r2) = (homogeneous(mu1, 1.0), homogeneous(mu2, 1.0));
        let oracle = (d * mu2 / mu1).sqrt();
        let p = a_profile(d, &r1, &r2, 32).map_err(|e| e.to_string())?;
        worst_a = p
            .a_values
            .iter()
            .fold(worst_a, |w, a| w.max((a - oracle).abs()));
        let an = PairAnalysis::new(d, &r1, &r2).map_err(|e| e.to_string())?;
        let r = mu2 / mu1;
        worst_r0 = worst_r0.max((an.r0.0 - r).abs()).max((an.r0.1 - r).abs());
    }
    let secs = start.elapsed().as_secs_f64();
    check(
        worst_a < 1e-4 && worst_r0 < 1e-4 && secs < 60.0,
        format!("max |A_d - sqrt(d mu2/mu1)| = {worst_a:.2e}, max |R0 - mu2/mu1| = {worst_r0:.2e}, {secs:.1} s"),
    )
}

fn random_pair(rng: &mut ChaCha8Rng) -> (PeriodicReaction, PeriodicReaction) {
    let mut one = || {
        let mean = rng.gen_range(0.5..2.0);
        let c1 = rng.gen_range(-0.3..0.3) * mean;
        let s1 = rng.gen_range(-0.3..0.3) * mean;
        let s2 = rng.gen_range(-0.15..0.15) * mean;
        let a = rng.gen_range(0.5..2.0);
        PeriodicReaction::logistic(
            FourierSeries {
                period: 1.0,
                mean,
                cosine: vec![c1],
                sine: vec![s1, s2],
            },
            a,
        )
        .unwrap()
    };
    (one(), one())
}

fn nesting() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut lines = Vec::new();
    let mut ok = true;
    for pair in 0..5 {
        let (r1, r2) = random_pair(&mut rng);
        let mut bounds = Vec::new();
        for d in [0.5, 1.0, 2.0, 4.0] {
            let an = PairAnalysis::new(d, &r1, &r2).map_err(|e| e.to_string())?;
            ok &= an.r_lo <= an.r0.0 && an.r0.0 <= an.r0.1 && an.r0.1 <= an.r_hi;
            bounds.push((an.r_lo, an.r_hi));
        }
        let spread = bounds.iter().fold(0.0_f64, |s, b| {
            s.max((b.0 - bounds[0].0).abs())
                .max((b.1 - bounds[0].1).abs())
        });
        ok &= spread <= 1e-6;
        lines.push(format!(
            "pair {pair}: [{:.4}, {:.4}] spread {spread:.1e}",
            bounds[0].0, bounds[0].1
        ));
    }
    check(ok, lines.join("; "))
}

fn verdicts(report: &ExperimentReport, names: &[&str]) -> Outcome {
    let mut ok = true;
    let mut details = Vec::new();
    for n in names {
        match report.verdict(n) {
            Some(v) => {
                ok &= v.passed;
                details.push(format!("{n}: {}", v.detail));
            }
            None => {
                ok = false;
                details.push(format!("{n}: missing"));
            }
        }
    }
    check(ok, details.join(" | "))
}

fn bracket_oracle() -> Outcome {
    let mut worst: f64 = 0.0;
    for (m, delta) in [(1.0, 1.0), (2.0, 0.5), (0.5, 3.0)] {
        let c = minimal_speed(&homogeneous(m, 1.0), delta)
            .map_err(|e| e.to_string())?
            .c_star;
        worst = worst.max((c - 2.0 * (delta * m).sqrt()).abs());
    }
    let (lo, hi) = speed_bracket(2.0, &homogeneous(1.0, 1.0), &homogeneous(0.5, 1.0))
        .map_err(|e| e.to_string())?;
    worst = worst.max((lo + 2.0).abs()).max((hi - 2.0).abs());
    check(
        worst < 1e-4,
        format!("max |c* - 2 sqrt(delta m)| = {worst:.2e}"),
    )
}

fn equilibrium() -> Outcome {
    let one = homogeneous(1.0, 1.0);
    let (d, alpha) = (2.0, 2f64.sqrt());
    let eq = build_equilibrium(0.0, d, alpha, &one, &one).map_err(|e| e.to_string())?;
    let inside = eq.e.iter().all(|e| *e > -d && *e < alpha);
    let perturbed = matches!(
        build_equilibrium(0.0, d, alpha + 0.1, &one, &one),
        Err(Error::InvalidGluing { .. })
    );
    check(
        eq.derivative_mismatch < 1e-5 && eq.residual_l2 < 1e-3 && inside && perturbed,
        format!(
            "mismatch {:.2e}, residual {:.2e}, strict bounds on {} samples: {inside}, perturbed alpha rejected: {perturbed}",
            eq.derivative_mismatch,
            eq.residual_l2,
            eq.e.len()
        ),
    )
}

fn csv_files(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(p) = stack.pop() {
        for entry in std::fs::read_dir(&p).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else if path.extension().is_some_and(|e| e == "csv") {
                out.insert(
                    path.strip_prefix(dir).unwrap().to_path_buf(),
                    std::fs::read(&path).unwrap(),
                );
            }
        }
    }
    out
}

fn determinism() -> Outcome {
    let mut compared = 0;
    for (cfg, simulate) in [("quick.toml", true), ("sign_grid.toml", false)] {
        let loaded = load(cfg);
        let mut runs = Vec::new();
        for rep in 0..2 {
            let dir = out_dir(&format!("determinism/{cfg}/{rep}"));
            let _ = std::fs::remove_dir_all(&dir);
            if simulate {
                let mut r = run_sweep(&loaded).map_err(|e| e.to_string())?;
                emit_report(&mut r, &loaded.source, &dir).map_err(|e| e.to_string())?;
            } else {
                let r = run_predictions(&loaded).map_err(|e| e.to_string())?;
                emit_predictions(&r, &loaded.source, &dir).map_err(|e| e.to_string())?;
            }
            runs.push(csv_files(&dir));
        }
        if runs[0].is_empty() || runs[0] != runs[1] {
            let differing: Vec<String> = runs[0]
                .iter()
                .filter(|(k, v)| runs[1].get(*k) != Some(*v))
                .map(|(k, _)| k.display().to_string())
                .collect();
            return Err(format!("{cfg}: differing files {differing:?}"));
        }
        compared += runs[0].len();
    }
    Ok(format!("{compared} CSV files byte-identical across reruns"))
}

fn main() {
    let filter: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    let wanted = |n: usize| filter.is_empty() || filter.iter().any(|f| f == &n.to_string());
    let mut results: Vec<(usize, &str, Outcome)> = Vec::new();
    let mut record = |n: usize, name: &'static str, f: &dyn Fn() -> Outcome| {
        if wanted(n) {
            let t = Instant::now();
            let r = f();
            println!(
                "{} {n:>2} {name} ({:.1} s): {}",
                if r.is_ok() { "PASS" } else { "FAIL" },
                t.elapsed().as_secs_f64(),
                r.as_ref().unwrap_or_else(|e| e)
            );
            results.push((n, name, r));
        }
    };

    record(1, "theta_homogeneous_oracle", &theta_homogeneous);
    record(2, "theta_scaling_law", &theta_scaling);
    record(3, "homogeneous_reduction", &homogeneous_reduction);
    record(4, "bound_nesting", &nesting);

    let sweep = if wanted(5) || wanted(6) || wanted(7) {
        let loaded = load("sign_grid.toml");
        let t = Instant::now();
        let mut r = run_sweep(&loaded).expect("sign grid sweep");
        let dir = out_dir("sign_grid");
        let _ = std::fs::remove_dir_all(&dir);
        emit_report(&mut r, &loaded.source, &dir).expect("sign grid report");
        println!(
            "     sign grid sweep: {} runs in {:.0} s",
            r.records.len(),
            t.elapsed().as_secs_f64()
        );
        Some(r)
    } else {
        None
    };
    if let Some(r) = &sweep {
        let hypotheses = validate_hypotheses(
            &load("sign_grid.toml").config.validate().unwrap().r1,
            Sampling::default(),
        )
        .map(|h| h.passed())
        .unwrap_or(false);
        record(5, "sign_agreement", &|| {
            verdicts(
                r,
                &[
                    "sign_agreement",
                    "logistic_corollary",
                    "runs_completed",
                    "speed_precision",
                ],
            )
            .and_then(|d| {
                let checked = r.points.iter().filter(|p| p.agree.is_some()).count();
                check(
                    checked > 0 && hypotheses,
                    format!("{checked} points checked; {d}"),
                )
            })
        });
        record(6, "speed_bracket", &|| {
            let oracle = bracket_oracle();
            let sweep = verdicts(r, &["speed_bracket"]);
            match (oracle, sweep) {
                (Ok(a), Ok(b)) => Ok(format!("{a}; {b}")),
                (a, b) => Err(format!(
                    "{}; {}",
                    a.unwrap_or_else(|e| e),
                    b.unwrap_or_else(|e| e)
                )),
            }
        });
        record(7, "segregation", &|| {
            verdicts(r, &["segregation_decreasing", "segregation_slope"])
        });
    }

    let fb = if wanted(8) || wanted(10) {
        let loaded = load("free_boundary.toml");
        let mut r = run_sweep(&loaded).expect("free boundary run");
        let dir = out_dir("free_boundary");
        let _ = std::fs::remove_dir_all(&dir);
        emit_report(&mut r, &loaded.source, &dir).expect("free boundary report");
        Some(r)
    } else {
        None
    };
    if let Some(r) = &fb {
        record(8, "free_boundary", &|| {
            verdicts(
                r,
                &[
                    "free_boundary_monotone",
                    "free_boundary_periodic",
                    "free_boundary_flux",
                ],
            )
        });
    }
    record(9, "equilibrium_gluing", &equilibrium);
    if let Some(r) = &fb {
        record(10, "speed_uniqueness", &|| {
            let speeds: Vec<String> = r
                .records
                .iter()
                .filter_map(|x| {
                    x.c_measured
                        .map(|c| format!("seed {}: {:.9} +/- {:.1e}", x.seed, c.c, c.stderr))
                })
                .collect();
            verdicts(r, &["speed_uniqueness", "runs_completed"])
                .map(|d| format!("{}; {d}", speeds.join(", ")))
        });
    }
    record(11, "determinism", &determinism);

    let failed = results.iter().filter(|r| r.2.is_err()).count();
    println!(
        "{} of {} criteria passed",
        results.len() - failed,
        results.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
