//! Minimal pulsating-front speeds of the scalar periodic Fisher-KPP equation
//! `u_t = delta u_xx + u f(u, x)`, via tilted periodic principal eigenvalues.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics::{golden_minimize, solve_cyclic_tridiagonal};
use crate::reaction::PeriodicReaction;

pub const DEFAULT_GRID: usize = 512;
const LAMBDA_LO: f64 = 1e-3;
const LAMBDA_HI: f64 = 1e3;

/// Periodic eigenproblem for `-delta psi'' - 2 delta lambda psi' - (delta lambda^2 + p) psi`.
pub struct EigenProblem<'a> {
    pub diffusion: f64,
    pub potential: &'a dyn Fn(f64) -> f64,
    pub period: f64,
    pub wavenumber: f64,
    pub grid_n: usize,
}

#[derive(Clone, Debug)]
pub struct EigenPair {
    pub value: f64,
    /// Positive eigenfunction on the `grid_n` nodes of one period, max 1.
    pub function: Vec<f64>,
}

/// Principal (Perron) eigenpair by shifted inverse power iteration.
///
/// The first-order tilt is discretized in the exponentially fitted form
/// `(e^{-lambda h} psi_{i+1} - 2 psi_i + e^{lambda h} psi_{i-1}) / h^2`, i.e. the
/// conjugation of the periodic Laplacian by `e^{lambda x}`. It is second-order
/// consistent and keeps the off-diagonal entries positive for every `lambda`,
/// so the shifted operator stays an M-matrix.
pub fn principal_eigenvalue(p: &EigenProblem<'_>) -> Result<EigenPair> {
    let n = p.grid_n;
    if n < 16 {
        return Err(Error::Domain(format!(
            "grid_n must be at least 16, got {n}"
        )));
    }
    if !(p.diffusion > 0.0) {
        return Err(Error::Domain("diffusion must be positive".into()));
    }
    let h = p.period / n as f64;
    let lam = p.wavenumber;
    let k = p.diffusion / (h * h);
    let right = -k * (-lam * h).exp();
    let left = -k * (lam * h).exp();
    let pot: Vec<f64> = (0..n).map(|i| (p.potential)(i as f64 * h)).collect();
    if pot.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("potential is not finite".into()));
    }
    let diag: Vec<f64> = pot.iter().map(|v| 2.0 * k - v).collect();

    // Gershgorin lower bound on the real parts of the spectrum.
    let gersh = diag
        .iter()
        .map(|d| d + left + right)
        .fold(f64::INFINITY, f64::min);
    let mut shift = gersh - 1.0;

    let lower = vec![left; n];
    let upper = vec![right; n];
    let mut v = vec![1.0; n];
    let mut shifted = vec![0.0; n];
    let mut gap = f64::INFINITY;
    for _ in 0..500 {
        for (s, d) in shifted.iter_mut().zip(&diag) {
            *s = d - shift;
        }
        let w = solve_cyclic_tridiagonal(&lower, &shifted, &upper, &v)?;
        // Collatz-Wielandt: for positive v, min and max of v_i / w_i bracket
        // the Perron root of the shifted operator.
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for (a, b) in v.iter().zip(&w) {
            if !(*b > 0.0) {
                return Err(Error::NumericalFailure {
                    what: "inverse iterate lost positivity".into(),
                    residual: gap,
                });
            }
            lo = lo.min(a / b);
            hi = hi.max(a / b);
        }
        let norm = w.iter().fold(0.0f64, |m, x| m.max(*x));
        for (vi, wi) in v.iter_mut().zip(&w) {
            *vi = wi / norm;
        }
        let (lb, ub) = (shift + lo, shift + hi);
        gap = ub - lb;
        if gap <= 1e-12 * (1.0 + lb.abs()) {
            return Ok(EigenPair {
                value: 0.5 * (lb + ub),
                function: v,
            });
        }
        shift = lb - gap.max(1e-6 * (1.0 + lb.abs()));
    }
    Err(Error::NumericalFailure {
        what: "inverse iteration did not converge".into(),
        residual: gap,
    })
}

/// Growth exponent `k(lambda)` with `-k(lambda)/lambda` the front speed at tilt `lambda`.
fn tilted_eigenvalue(
    potential: &dyn Fn(f64) -> f64,
    period: f64,
    delta: f64,
    lambda: f64,
    grid_n: usize,
) -> Result<f64> {
    Ok(principal_eigenvalue(&EigenProblem {
        diffusion: delta,
        potential,
        period,
        wavenumber: lambda,
        grid_n,
    })?
    .value)
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct MinimalSpeedResult {
    pub c_star: f64,
    pub lambda_opt: f64,
    pub bracket: (f64, f64),
}

pub fn minimal_speed(r: &PeriodicReaction, delta: f64) -> Result<MinimalSpeedResult> {
    minimal_speed_with_grid(r, delta, DEFAULT_GRID)
}

/// `c* = min_{lambda > 0} -k(lambda) / lambda`, golden search on `log lambda`.
pub fn minimal_speed_with_grid(
    r: &PeriodicReaction,
    delta: f64,
    grid_n: usize,
) -> Result<MinimalSpeedResult> {
    if !(delta > 0.0) {
        return Err(Error::Domain(format!(
            "diffusion must be positive, got {delta}"
        )));
    }
    let potential = |x: f64| r.eval(0.0, x);
    let speed = |log_lambda: f64| -> Result<f64> {
        let lambda = log_lambda.exp();
        Ok(-tilted_eigenvalue(&potential, r.period(), delta, lambda, grid_n)? / lambda)
    };
    let (lo, hi) = (LAMBDA_LO.ln(), LAMBDA_HI.ln());
    let (arg, c_star) = golden_minimize(speed, lo, hi, 1e-7)?;
    if hi - arg < 1e-3 {
        return Err(Error::UnboundedSearch(format!(
            "minimizing tilt reached lambda = {LAMBDA_HI:e}"
        )));
    }
    Ok(MinimalSpeedResult {
        c_star,
        lambda_opt: arg.exp(),
        bracket: (LAMBDA_LO, LAMBDA_HI),
    })
}

/// `(-c*[d, 2], c*[1, 1])`: every finite-competition front speed lies inside.
pub fn speed_bracket(d: f64, r1: &PeriodicReaction, r2: &PeriodicReaction) -> Result<(f64, f64)> {
    let lower = minimal_speed(r2, d)?.c_star;
    let upper = minimal_speed(r1, 1.0)?.c_star;
    Ok((-lower, upper))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reaction::sine_rate;
    use std::f64::consts::PI;

    fn eig(delta: f64, lambda: f64, pot: &dyn Fn(f64) -> f64, n: usize) -> EigenPair {
        principal_eigenvalue(&EigenProblem {
            diffusion: delta,
            potential: pot,
            period: 1.0,
            wavenumber: lambda,
            grid_n: n,
        })
        .unwrap()
    }

    #[test]
    fn constant_potential_untilted() {
        let e = eig(1.0, 0.0, &|_| 1.0, 128);
        assert!((e.value + 1.0).abs() < 1e-10);
        assert!(e.function.iter().all(|v| (v - 1.0).abs() < 1e-9));
    }

    #[test]
    fn constant_potential_tilted() {
        let e = eig(1.0, 1.0, &|_| 1.0, DEFAULT_GRID);
        assert!((e.value + 2.0).abs() < 1e-6, "{}", e.value);
    }

    #[test]
    fn grid_too_small_is_rejected() {
        let r = principal_eigenvalue(&EigenProblem {
            diffusion: 1.0,
            potential: &|_| 1.0,
            period: 1.0,
            wavenumber: 0.0,
            grid_n: 8,
        });
        assert!(matches!(r, Err(Error::Domain(_))));
    }

    #[test]
    fn sine_potential_converges_to_dense_reference() {
        let pot = |x: f64| 2.0 + (2.0 * PI * x).sin();
        let reference = eig(1.0, 0.0, &pot, 4096).value;
        let coarse = eig(1.0, 0.0, &pot, DEFAULT_GRID);
        assert!(reference > -3.0 && reference < -2.0);
        assert!((coarse.value - reference).abs() < 1e-6);
        assert!(coarse.function.iter().all(|v| *v > 0.0));
        // second order: error drops by ~4 per halving
        let e1 = (eig(1.0, 0.0, &pot, 64).value - reference).abs();
        let e2 = (eig(1.0, 0.0, &pot, 128).value - reference).abs();
        assert!(e1 / e2 > 3.5 && e1 / e2 < 4.5, "{e1} {e2}");
    }

    #[test]
    fn homogeneous_dispersion_minimum() {
        let r = PeriodicReaction::homogeneous(1.0, 1.0, 1.0).unwrap();
        let s = minimal_speed(&r, 1.0).unwrap();
        assert!((s.c_star - 2.0).abs() < 1e-4, "{s:?}");
        assert!((s.lambda_opt - 1.0).abs() < 1e-2);
        let s4 = minimal_speed(&r, 4.0).unwrap();
        assert!((s4.c_star - 4.0).abs() < 1e-4);
    }

    #[test]
    fn periodic_speed_in_bracket() {
        let r = PeriodicReaction::logistic(sine_rate(2.0, 1.0, 1.0), 1.0).unwrap();
        let s = minimal_speed(&r, 1.0).unwrap();
        assert!(s.c_star >= 2.0 && s.c_star <= 2.0 * 3f64.sqrt(), "{s:?}");
        let fine = minimal_speed_with_grid(&r, 1.0, 2048).unwrap();
        assert!((s.c_star - fine.c_star).abs() < 1e-5);
    }

    #[test]
    fn bracket_for_homogeneous_pairs() {
        let r = PeriodicReaction::homogeneous(1.0, 1.0, 1.0).unwrap();
        let (lo, hi) = speed_bracket(1.0, &r, &r).unwrap();
        assert!((lo + 2.0).abs() < 1e-4 && (hi - 2.0).abs() < 1e-4);
        assert!((lo + hi).abs() < 1e-9);
        let (lo4, _) = speed_bracket(4.0, &r, &r).unwrap();
        assert!((lo4 + 4.0).abs() < 1e-4);
    }

    #[test]
    fn speed_decreases_with_potential() {
        let hi = PeriodicReaction::logistic(sine_rate(2.0, 1.0, 1.0), 1.0).unwrap();
        let lo = PeriodicReaction::logistic(sine_rate(1.5, 0.5, 1.0), 1.0).unwrap();
        assert!(minimal_speed(&lo, 1.0).unwrap().c_star < minimal_speed(&hi, 1.0).unwrap().c_star);
    }
}
