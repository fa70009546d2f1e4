//! Post-processing of simulation output: front speed, traveling-coordinate
//! profiles, segregation, the free boundary and stationary equilibria.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics::trapezoid;
use crate::sim::{Crossing, Snapshot, SystemParams, SystemState};
use crate::theta::eta;

/// Speeds below this are treated as stationary.
pub const C_FLOOR: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Level {
    /// `u1 = a1/2`, leftmost crossing.
    Species1,
    /// `u2 = a2/2`, rightmost crossing.
    Species2,
}

#[derive(Clone, Debug)]
pub struct SpeedConfig {
    pub period: f64,
    /// Leading fraction of the log dropped as transient.
    pub discard_fraction: f64,
    /// Harmonics of the pulsation frequency removed by the fit.
    pub harmonics: usize,
    pub min_periods: f64,
    /// Minimum trailing duration when the speed is close to zero.
    pub min_time: f64,
}

impl SpeedConfig {
    pub fn new(period: f64) -> Self {
        SpeedConfig {
            period,
            discard_fraction: 0.5,
            harmonics: 3,
            min_periods: 3.0,
            min_time: 2.0,
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct SpeedEstimate {
    pub c: f64,
    pub stderr: f64,
    pub window: (f64, f64),
    pub crossings_used: usize,
    /// Number of pulsation periods in the window (0 for the stationary fit).
    pub periods: usize,
    pub residual_rms: f64,
}

impl SpeedEstimate {
    /// `stderr < 0.02 max(|c|, C_FLOOR)`.
    pub fn is_precise(&self) -> bool {
        self.stderr < 0.02 * self.c.abs().max(C_FLOOR)
    }

    pub fn is_ambiguous(&self) -> bool {
        let a = self.c.abs();
        (C_FLOOR..=3.0 * C_FLOOR).contains(&a)
    }
}

/// Least squares for `x = b + c (t - tm) + sum_j (p_j cos(j w t) + q_j sin(j w t))`.
/// Returns `(c, stderr(c), rms residual, max |residual|)`.
fn harmonic_fit(
    ts: &[f64],
    xs: &[f64],
    omega: f64,
    harmonics: usize,
) -> Result<(f64, f64, f64, f64)> {
    let n = ts.len();
    let h = if omega > 0.0 { harmonics } else { 0 };
    let p = 2 + 2 * h;
    if n <= p + 1 {
        return Err(Error::InsufficientData(format!(
            "{n} crossings for {p} fit parameters"
        )));
    }
    let tm = ts.iter().sum::<f64>() / n as f64;
    let design = DMatrix::from_fn(n, p, |i, j| {
        let t = ts[i];
        match j {
            0 => 1.0,
            1 => t - tm,
            _ => {
                let m = ((j - 2) / 2 + 1) as f64;
                if (j - 2) % 2 == 0 {
                    (m * omega * t).cos()
                } else {
                    (m * omega * t).sin()
                }
            }
        }
    });
    let y = DVector::from_column_slice(xs);
    let normal = design.transpose() * &design;
    let inv = normal
        .try_inverse()
        .ok_or_else(|| Error::NumericalFailure {
            what: "singular speed-fit normal matrix".into(),
            residual: 0.0,
        })?;
    let beta = &inv * (design.transpose() * &y);
    let resid = &y - &design * &beta;
    let sse = resid.norm_squared();
    let sigma2 = sse / (n - p) as f64;
    let stderr = (sigma2 * inv[(1, 1)]).max(0.0).sqrt();
    let max_abs = resid.iter().fold(0.0f64, |m, r| m.max(r.abs()));
    Ok((beta[1], stderr, (sse / n as f64).sqrt(), max_abs))
}

/// Speed from a level-set crossing log.
///
/// For a pulsating front `x(t) - c t` is periodic with period `L/|c|`, so the
/// fit runs on a trailing window of an integer number of pulsation periods
/// and removes the first few harmonics; the window is re-derived from each
/// new estimate until it stops changing.
pub fn estimate_speed(
    times: &[f64],
    positions: &[f64],
    cfg: &SpeedConfig,
) -> Result<SpeedEstimate> {
    if times.len() != positions.len() {
        return Err(Error::Domain("times and positions differ in length".into()));
    }
    if times.len() < 8 {
        return Err(Error::InsufficientData(format!(
            "{} crossings",
            times.len()
        )));
    }
    if positions.iter().chain(times).any(|v| !v.is_finite()) {
        return Err(Error::NotAFront("non-finite crossing".into()));
    }
    let t_first = times[0];
    let t_end = *times.last().unwrap();
    let t_trail = t_first + cfg.discard_fraction * (t_end - t_first);
    let duration = t_end - t_trail;
    if duration < cfg.min_time {
        return Err(Error::InsufficientData(format!(
            "trailing window {duration} shorter than {}",
            cfg.min_time
        )));
    }
    let slice_from = |t0: f64| {
        let i = times.partition_point(|t| *t < t0 - 1e-12);
        (&times[i..], &positions[i..])
    };

    let (ts, xs) = slice_from(t_trail);
    let mut c = harmonic_fit(ts, xs, 0.0, 0)?.0;
    let mut result = None;
    for _ in 0..12 {
        let (t0, omega, periods) = if c.abs() <= 3.0 * C_FLOOR {
            (t_trail, 0.0, 0)
        } else {
            let pulse = cfg.period / c.abs();
            let k = (duration / pulse).floor();
            if k < cfg.min_periods {
                return Err(Error::InsufficientData(format!(
                    "trailing window holds {k} pulsation periods of {pulse:.4}, need {}",
                    cfg.min_periods
                )));
            }
            (
                t_end - k * pulse,
                2.0 * std::f64::consts::PI / pulse,
                k as usize,
            )
        };
        let (ts, xs) = slice_from(t0);
        let (c_new, stderr, rms, max_abs) = harmonic_fit(ts, xs, omega, cfg.harmonics)?;
        if max_abs > cfg.period {
            return Err(Error::NotAFront(format!(
                "crossing deviates {max_abs:.3} from a pulsating track"
            )));
        }
        let done = (c_new - c).abs() <= 1e-12 * (1.0 + c.abs());
        c = c_new;
        result = Some(SpeedEstimate {
            c,
            stderr,
            window: (ts[0], t_end),
            crossings_used: ts.len(),
            periods,
            residual_rms: rms,
        });
        if done {
            break;
        }
    }
    Ok(result.expect("at least one fit"))
}

/// Speed estimated on the level matching the sign convention of the
/// normalization: `u1 = a1/2` for non-positive speeds, `u2 = a2/2` otherwise.
/// The other level is returned as a cross-check.
pub fn estimate_speed_from_log(
    log: &[Crossing],
    cfg: &SpeedConfig,
) -> Result<(SpeedEstimate, SpeedEstimate)> {
    let ts: Vec<f64> = log.iter().map(|c| c.t).collect();
    let x1: Vec<f64> = log.iter().map(|c| c.u1_level).collect();
    let x2: Vec<f64> = log.iter().map(|c| c.u2_level).collect();
    let s1 = estimate_speed(&ts, &x1, cfg)?;
    let s2 = estimate_speed(&ts, &x2, cfg)?;
    Ok(if s1.c <= 0.0 { (s1, s2) } else { (s2, s1) })
}

/// Front profile `phi_i(xi, x)` sampled on `xi_grid` x `x_grid`, rows indexed by `xi`.
#[derive(Clone, Debug, Serialize)]
pub struct ProfileSamples {
    pub xi_grid: Vec<f64>,
    pub x_grid: Vec<f64>,
    pub phi1: Vec<Vec<f64>>,
    pub phi2: Vec<Vec<f64>>,
    /// Fraction of bins that received at least one sample.
    pub occupancy: f64,
    pub a1: f64,
    pub a2: f64,
}

impl ProfileSamples {
    pub fn dxi(&self) -> f64 {
        self.xi_grid[1] - self.xi_grid[0]
    }

    /// Largest increase of `phi1` or decrease of `phi2` along `xi`, relative to `a_i`.
    pub fn monotonicity_violation(&self) -> f64 {
        let mut worst = 0.0f64;
        for j in 0..self.x_grid.len() {
            for i in 1..self.xi_grid.len() {
                worst = worst.max((self.phi1[i][j] - self.phi1[i - 1][j]) / self.a1);
                worst = worst.max((self.phi2[i - 1][j] - self.phi2[i][j]) / self.a2);
            }
        }
        worst
    }

    /// `(max_x |phi1(xi_min, x) - a1| / a1, max_x |phi2(xi_max, x) - a2| / a2)`.
    pub fn limit_errors(&self) -> (f64, f64) {
        let first = &self.phi1[0];
        let last = &self.phi2[self.xi_grid.len() - 1];
        let e1 = first.iter().fold(0.0f64, |m, v| m.max((v - self.a1).abs())) / self.a1;
        let e2 = last.iter().fold(0.0f64, |m, v| m.max((v - self.a2).abs())) / self.a2;
        (e1, e2)
    }

    /// `alpha phi1 - d phi2`.
    pub fn psi(&self, d: f64, alpha: f64) -> Vec<Vec<f64>> {
        self.phi1
            .iter()
            .zip(&self.phi2)
            .map(|(a, b)| a.iter().zip(b).map(|(p, q)| alpha * p - d * q).collect())
            .collect()
    }

    /// `int int phi1 phi2 dxi dx`.
    pub fn overlap(&self) -> f64 {
        let dx = self.x_grid.get(1).map_or(0.0, |x| x - self.x_grid[0]);
        let mut s = 0.0;
        for (a, b) in self.phi1.iter().zip(&self.phi2) {
            s += a.iter().zip(b).map(|(p, q)| p * q).sum::<f64>();
        }
        s * dx * self.dxi()
    }
}

/// Maps snapshot samples to `(xi = x - c t, x mod L)`. Each `x`-column
/// collects its samples sorted by `xi` and is interpolated linearly onto a
/// `xi` grid with the grid spacing; occupancy counts grid cells that hold at
/// least one raw sample.
pub fn reconstruct_profile(
    snaps: &[Snapshot],
    c: f64,
    period: f64,
    a1: f64,
    a2: f64,
) -> Result<ProfileSamples> {
    if c.abs() <= C_FLOOR {
        return Err(Error::DegenerateCoordinates { c });
    }
    let first = snaps
        .first()
        .ok_or_else(|| Error::InsufficientData("no snapshots".into()))?;
    let span = snaps.last().unwrap().t - first.t;
    if span < period / c.abs() {
        return Err(Error::InsufficientData(format!(
            "snapshots span {span}, one pulsation period is {}",
            period / c.abs()
        )));
    }
    let dxi = first.dx;
    let npp = first.nodes_per_period;
    let mut columns: Vec<Vec<(f64, f64, f64)>> = vec![Vec::new(); npp];
    for s in snaps {
        for i in 0..s.u1.len() {
            columns[s.phase(i)].push((s.x(i) - c * s.t, s.u1[i], s.u2[i]));
        }
    }
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for col in columns.iter_mut() {
        col.sort_by(|a, b| a.0.total_cmp(&b.0));
        if let (Some(f), Some(l)) = (col.first(), col.last()) {
            lo = lo.min(f.0);
            hi = hi.max(l.0);
        } else {
            return Err(Error::InsufficientData("empty profile column".into()));
        }
    }
    let j0 = (lo / dxi).ceil() as i64;
    let j1 = (hi / dxi).floor() as i64;
    let xi_grid: Vec<f64> = (j0..=j1).map(|j| j as f64 * dxi).collect();
    let m = xi_grid.len();
    if m < 2 {
        return Err(Error::InsufficientData(
            "profile shorter than two cells".into(),
        ));
    }
    let mut phi1 = vec![vec![0.0; npp]; m];
    let mut phi2 = vec![vec![0.0; npp]; m];
    let mut occupied = vec![vec![false; npp]; m];
    for (ph, col) in columns.iter().enumerate() {
        for &(xi, _, _) in col {
            let j = ((xi / dxi).round() as i64 - j0).clamp(0, m as i64 - 1) as usize;
            occupied[j][ph] = true;
        }
        let mut k = 0usize;
        for (j, &xi) in xi_grid.iter().enumerate() {
            while k + 1 < col.len() && col[k + 1].0 <= xi {
                k += 1;
            }
            let (v1, v2) = if xi <= col[0].0 {
                (col[0].1, col[0].2)
            } else if k + 1 >= col.len() {
                let l = col[col.len() - 1];
                (l.1, l.2)
            } else {
                let (a, b) = (col[k], col[k + 1]);
                let w = if b.0 > a.0 {
                    (xi - a.0) / (b.0 - a.0)
                } else {
                    0.5
                };
                ((1.0 - w) * a.1 + w * b.1, (1.0 - w) * a.2 + w * b.2)
            };
            phi1[j][ph] = v1;
            phi2[j][ph] = v2;
        }
    }
    let filled = occupied.iter().flatten().filter(|b| **b).count();
    Ok(ProfileSamples {
        xi_grid,
        x_grid: (0..npp).map(|j| j as f64 * dxi).collect(),
        phi1,
        phi2,
        occupancy: filled as f64 / (m * npp) as f64,
        a1,
        a2,
    })
}

/// First `xi` in a column where `values` drops below `level`.
fn first_below(xi: &[f64], values: impl Fn(usize) -> f64, level: f64) -> Option<f64> {
    let i = (0..xi.len()).find(|&i| values(i) < level)?;
    if i == 0 {
        return Some(xi[0]);
    }
    let (a, b) = (values(i - 1), values(i));
    Some(xi[i - 1] + (a - level) / (a - b) * (xi[i] - xi[i - 1]))
}

/// Last `xi` in a column where `values` is below `level`.
fn last_below(xi: &[f64], values: impl Fn(usize) -> f64, level: f64) -> Option<f64> {
    let i = (0..xi.len()).rev().find(|&i| values(i) < level)?;
    if i + 1 == xi.len() {
        return Some(xi[i]);
    }
    let (a, b) = (values(i), values(i + 1));
    Some(xi[i] + (level - a) / (b - a) * (xi[i + 1] - xi[i]))
}

/// Position of the normalization anchor: the inf-rule on `phi1` when
/// `c_sign <= 0`, the sup-rule on `phi2` otherwise.
pub fn normalization_anchor(p: &ProfileSamples, c_sign: f64) -> Result<f64> {
    let cols = 0..p.x_grid.len();
    let anchor = if c_sign <= 0.0 {
        cols.filter_map(|j| first_below(&p.xi_grid, |i| p.phi1[i][j], 0.5 * p.a1))
            .fold(f64::INFINITY, f64::min)
    } else {
        cols.filter_map(|j| last_below(&p.xi_grid, |i| p.phi2[i][j], 0.5 * p.a2))
            .fold(f64::NEG_INFINITY, f64::max)
    };
    let (lo, hi) = (p.xi_grid[0], *p.xi_grid.last().unwrap());
    if !anchor.is_finite() || anchor <= lo || anchor >= hi {
        return Err(Error::OutOfRange);
    }
    Ok(anchor)
}

/// Translates the profile so the anchor sits at `xi = 0`, resampling by
/// linear interpolation onto `xi` values that are multiples of the spacing.
/// Returns the profile and the applied shift.
pub fn normalize(p: &ProfileSamples, c_sign: f64) -> Result<(ProfileSamples, f64)> {
    let anchor = normalization_anchor(p, c_sign)?;
    let h = p.dxi();
    let (lo, hi) = (p.xi_grid[0] - anchor, *p.xi_grid.last().unwrap() - anchor);
    let j0 = (lo / h - 1e-9).ceil() as i64;
    let j1 = (hi / h + 1e-9).floor() as i64;
    let m = p.xi_grid.len();
    let sample = |rows: &[Vec<f64>], xi_new: f64, col: usize| {
        let pos = ((xi_new + anchor - p.xi_grid[0]) / h).clamp(0.0, (m - 1) as f64);
        let i = (pos.floor() as usize).min(m - 2);
        let s = pos - i as f64;
        (1.0 - s) * rows[i][col] + s * rows[i + 1][col]
    };
    let xi_grid: Vec<f64> = (j0..=j1).map(|j| j as f64 * h).collect();
    let resample = |rows: &[Vec<f64>]| -> Vec<Vec<f64>> {
        xi_grid
            .iter()
            .map(|&xi| (0..p.x_grid.len()).map(|c| sample(rows, xi, c)).collect())
            .collect()
    };
    let out = ProfileSamples {
        phi1: resample(&p.phi1),
        phi2: resample(&p.phi2),
        xi_grid,
        x_grid: p.x_grid.clone(),
        occupancy: p.occupancy,
        a1: p.a1,
        a2: p.a2,
    };
    Ok((out, -anchor))
}

/// `int u1 u2 dx` over the nodes inside `window`.
pub fn segregation_index(state: &SystemState, window: (f64, f64)) -> f64 {
    let g = state.grid;
    let idx: Vec<usize> = (0..g.n())
        .filter(|&i| g.x(i) >= window.0 && g.x(i) <= window.1)
        .collect();
    let prod: Vec<f64> = idx.iter().map(|&i| state.u1[i] * state.u2[i]).collect();
    trapezoid(&prod, g.dx())
}

/// Interface trace `Xi(t)` of the zero set of `v_d` with one-sided data.
#[derive(Clone, Debug, Serialize)]
pub struct FreeBoundaryTrace {
    pub times: Vec<f64>,
    pub xi_of_t: Vec<f64>,
    /// `d_x v_d` at `Xi^-` (inside the species-1 territory) and `Xi^+`.
    pub flux_left: Vec<f64>,
    pub flux_right: Vec<f64>,
    /// One-sided `d_xx v_d` at `Xi^-` and `Xi^+`.
    pub curv_left: Vec<f64>,
    pub curv_right: Vec<f64>,
    pub s: f64,
    pub dx: f64,
    /// Largest node offset between the interface and the flux stencil.
    pub offset_nodes: usize,
}

#[derive(Clone, Debug)]
pub struct FluxStencil {
    pub min_offset: usize,
    /// Number of nodes in each one-sided polynomial fit.
    pub span: usize,
    pub degree: usize,
    /// Nodes where both species exceed this fraction of `a_i` form the
    /// transition layer the stencil must clear.
    pub layer_level: f64,
}

impl Default for FluxStencil {
    fn default() -> Self {
        FluxStencil {
            min_offset: 2,
            span: 8,
            degree: 2,
            layer_level: 1e-2,
        }
    }
}

/// Least-squares polynomial in `y` through `(y_i, z_i)`; returns `(z'(0), z''(0))`.
fn poly_derivatives(ys: &[f64], zs: &[f64], degree: usize) -> Result<(f64, f64)> {
    let design = DMatrix::from_fn(ys.len(), degree + 1, |i, j| ys[i].powi(j as i32));
    let y = DVector::from_column_slice(zs);
    let normal = design.transpose() * &design;
    let beta = normal
        .try_inverse()
        .ok_or_else(|| Error::NumericalFailure {
            what: "singular flux fit".into(),
            residual: 0.0,
        })?
        * (design.transpose() * y);
    Ok((beta[1], 2.0 * beta[2]))
}

fn sign_changes(v: &[f64], eps: f64) -> Vec<usize> {
    let mut out = Vec::new();
    let mut last: Option<(usize, bool)> = None;
    for (i, &x) in v.iter().enumerate() {
        if x.abs() <= eps {
            continue;
        }
        let pos = x > 0.0;
        if let Some((j, p)) = last {
            if p != pos {
                out.push(j);
            }
        }
        last = Some((i, pos));
    }
    out
}

/// Extracts `Xi(t)` and the one-sided derivatives of `v_d` from snapshots.
pub fn extract_free_boundary(
    snaps: &[Snapshot],
    params: &SystemParams,
    s: f64,
    stencil: &FluxStencil,
) -> Result<FreeBoundaryTrace> {
    if s.abs() <= C_FLOOR {
        return Err(Error::DegenerateCoordinates { c: s });
    }
    let (d, alpha, a1, a2) = (params.d, params.alpha, params.a1(), params.a2());
    let eps = 1e-12 * (alpha * a1).max(d * a2);
    let mut trace = FreeBoundaryTrace {
        times: Vec::with_capacity(snaps.len()),
        xi_of_t: Vec::new(),
        flux_left: Vec::new(),
        flux_right: Vec::new(),
        curv_left: Vec::new(),
        curv_right: Vec::new(),
        s,
        dx: snaps.first().map_or(0.0, |f| f.dx),
        offset_nodes: 0,
    };
    for snap in snaps {
        let v: Vec<f64> = snap
            .u1
            .iter()
            .zip(&snap.u2)
            .map(|(p, q)| alpha * p - d * q)
            .collect();
        let changes = sign_changes(&v, eps);
        let j = match changes.len() {
            0 => return Err(Error::NoInterface { t: snap.t }),
            1 => changes[0],
            count => return Err(Error::MultiInterface { t: snap.t, count }),
        };
        // `j` is the last node on the positive side; skip exact zeros.
        let jr = (j + 1..v.len()).find(|&i| v[i].abs() > eps).unwrap();
        let (vl, vr) = (v[j], v[jr]);
        let xi = snap.x(j) + vl / (vl - vr) * (snap.x(jr) - snap.x(j));
        if v[j] < 0.0 {
            return Err(Error::NotAFront(format!(
                "species 2 on the left at t = {}",
                snap.t
            )));
        }

        let layer = snap
            .u1
            .iter()
            .zip(&snap.u2)
            .filter(|(p, q)| **p > stencil.layer_level * a1 && **q > stencil.layer_level * a2)
            .count();
        let off = stencil.min_offset.max(layer / 2 + 1);
        trace.offset_nodes = trace.offset_nodes.max(off);
        let span = stencil.span;
        if j + 1 < off + span || jr + off + span > v.len() {
            return Err(Error::InsufficientData(format!(
                "flux stencil leaves the snapshot at t = {}",
                snap.t
            )));
        }
        let left: Vec<usize> = (j + 1 - off - span..j + 1 - off).collect();
        let right: Vec<usize> = (jr + off - 1..jr + off - 1 + span).collect();
        let fit = |idx: &[usize]| {
            let ys: Vec<f64> = idx.iter().map(|&i| snap.x(i) - xi).collect();
            let zs: Vec<f64> = idx.iter().map(|&i| v[i]).collect();
            poly_derivatives(&ys, &zs, stencil.degree)
        };
        let (fl, cl) = fit(&left)?;
        let (fr, cr) = fit(&right)?;
        trace.times.push(snap.t);
        trace.xi_of_t.push(xi);
        trace.flux_left.push(fl);
        trace.flux_right.push(fr);
        trace.curv_left.push(cl);
        trace.curv_right.push(cr);
    }
    if trace.times.is_empty() {
        return Err(Error::InsufficientData("no snapshots".into()));
    }
    Ok(trace)
}

impl FreeBoundaryTrace {
    /// Largest step of `Xi` against the direction of `s`.
    pub fn monotonicity_violation(&self) -> f64 {
        let dir = self.s.signum();
        let mut best = f64::NEG_INFINITY;
        let mut worst = 0.0f64;
        for &x in &self.xi_of_t {
            let y = dir * x;
            best = best.max(y);
            worst = worst.max(best - y);
        }
        worst
    }

    /// `Xi^{-1}` by monotone linear interpolation; samples with equal `Xi` are merged at their mean time.
    fn inverse_samples(&self) -> (Vec<f64>, Vec<f64>) {
        let dir = self.s.signum();
        let mut pairs: Vec<(f64, f64)> = self
            .xi_of_t
            .iter()
            .zip(&self.times)
            .map(|(x, t)| (dir * x, *t))
            .collect();
        // Enforce monotonicity with a running max (jitter below a grid cell).
        let mut run = f64::NEG_INFINITY;
        for p in pairs.iter_mut() {
            run = run.max(p.0);
            p.0 = run;
        }
        let mut xs: Vec<f64> = Vec::new();
        let mut ts: Vec<f64> = Vec::new();
        let mut i = 0;
        while i < pairs.len() {
            let mut j = i;
            while j + 1 < pairs.len() && pairs[j + 1].0 == pairs[i].0 {
                j += 1;
            }
            xs.push(pairs[i].0);
            ts.push(0.5 * (pairs[i].1 + pairs[j].1));
            i = j + 1;
        }
        (xs, ts)
    }

    /// `max |g(x + L) - g(x)| / L` for `g(x) = x - s Xi^{-1}(x)`.
    pub fn periodicity_deviation(&self, period: f64) -> Result<f64> {
        let dir = self.s.signum();
        let (xs, ts) = self.inverse_samples();
        let (lo, hi) = (xs[0], *xs.last().unwrap());
        if hi - lo <= period {
            return Err(Error::InsufficientData(format!(
                "interface covers {} < one period",
                hi - lo
            )));
        }
        let inv = |y: f64| {
            let i = xs.partition_point(|v| *v <= y).clamp(1, xs.len() - 1);
            let (a, b) = (xs[i - 1], xs[i]);
            ts[i - 1] + (y - a) / (b - a) * (ts[i] - ts[i - 1])
        };
        // g in the original orientation: x = dir * y.
        let g = |y: f64| dir * y - self.s * inv(y);
        let samples = 512;
        let step = (hi - lo - period) / samples as f64;
        let mut worst = 0.0f64;
        for m in 0..=samples {
            let y = lo + m as f64 * step;
            worst = worst.max((g(y + period) - g(y)).abs());
        }
        Ok(worst / period)
    }

    /// `max_t |flux_left - flux_right| / |flux_left|`.
    pub fn flux_mismatch(&self) -> f64 {
        self.flux_left
            .iter()
            .zip(&self.flux_right)
            .map(|(l, r)| (l - r).abs() / l.abs())
            .fold(0.0, f64::max)
    }

    /// Median of the same ratio.
    pub fn flux_mismatch_median(&self) -> f64 {
        let v: Vec<f64> = self
            .flux_left
            .iter()
            .zip(&self.flux_right)
            .map(|(l, r)| (l - r).abs() / l.abs())
            .collect();
        median(v)
    }

    pub fn fluxes_negative(&self) -> bool {
        self.flux_left
            .iter()
            .chain(&self.flux_right)
            .all(|f| *f < 0.0)
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct XiPrimeReport {
    pub median_discrepancy: f64,
    pub samples: usize,
}

/// Compares the finite-difference `Xi'` with the jump formula
/// `d/(1-d) (z''(Xi^-) - z''(Xi^+)) / z'(Xi)`.
pub fn xi_prime_check(trace: &FreeBoundaryTrace, d: f64) -> Result<XiPrimeReport> {
    if (d - 1.0).abs() < 1e-12 {
        return Err(Error::NotApplicable(
            "the curvature jump vanishes when d = 1".into(),
        ));
    }
    if trace.s.abs() <= C_FLOOR {
        return Err(Error::DegenerateCoordinates { c: trace.s });
    }
    let n = trace.times.len();
    if n < 3 {
        return Err(Error::InsufficientData(format!("{n} trace samples")));
    }
    let mut rel = Vec::with_capacity(n - 2);
    for i in 1..n - 1 {
        let fd = (trace.xi_of_t[i + 1] - trace.xi_of_t[i - 1])
            / (trace.times[i + 1] - trace.times[i - 1]);
        let flux = 0.5 * (trace.flux_left[i] + trace.flux_right[i]);
        let formula = d / (1.0 - d) * (trace.curv_left[i] - trace.curv_right[i]) / flux;
        rel.push((fd - formula).abs() / formula.abs().max(1e-12));
    }
    Ok(XiPrimeReport {
        median_discrepancy: median(rel),
        samples: n - 2,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct ExtractedEquilibrium {
    pub x: Vec<f64>,
    pub e: Vec<f64>,
    /// Zero of `e` (linear interpolation).
    pub zero: f64,
    pub zero_count: usize,
    /// Discrete L2 norm of `-e'' - eta[e]` outside the transition layer.
    pub residual_l2: f64,
    /// `(min e + d a2, alpha a1 - max e)`, both positive for strict bounds.
    pub bound_margins: (f64, f64),
}

/// Reads `e = alpha u1 - d u2` off a converged large-`k` state.
/// `rate` is `max |du/dt|` measured by the caller at the final time.
pub fn extract_equilibrium(
    state: &SystemState,
    params: &SystemParams,
    rate: f64,
    rate_tol: f64,
    exclude: f64,
) -> Result<ExtractedEquilibrium> {
    if !(rate <= rate_tol) {
        return Err(Error::PrematureExtraction { rate });
    }
    let (d, alpha) = (params.d, params.alpha);
    let g = state.grid;
    let e: Vec<f64> = state
        .u1
        .iter()
        .zip(&state.u2)
        .map(|(p, q)| alpha * p - d * q)
        .collect();
    let x: Vec<f64> = (0..g.n()).map(|i| g.x(i)).collect();
    let changes = sign_changes(&e, 1e-12 * alpha * params.a1());
    let j = *changes.first().ok_or(Error::NoInterface { t: state.t })?;
    let jr = (j + 1..e.len()).find(|&i| e[i] != 0.0).unwrap();
    let zero = x[j] + e[j] / (e[j] - e[jr]) * (x[jr] - x[j]);
    let h = g.dx();
    let mut sse = 0.0;
    // The Neumann edge nodes carry no interior equation.
    for i in 1..e.len() - 1 {
        if (x[i] - zero).abs() < exclude {
            continue;
        }
        let lap = (e[i + 1] - 2.0 * e[i] + e[i - 1]) / (h * h);
        let r = -lap - eta(e[i], x[i], d, alpha, &params.r1, &params.r2);
        sse += r * r * h;
    }
    let emin = e.iter().cloned().fold(f64::INFINITY, f64::min);
    let emax = e.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok(ExtractedEquilibrium {
        zero,
        zero_count: changes.len(),
        residual_l2: sse.sqrt(),
        bound_margins: (emin + d * params.a2(), alpha * params.a1() - emax),
        x,
        e,
    })
}

/// Discrete L2 norm of `(v_1^{n+1} - v_1^n)/dt - D_xx v_d^{n+1} - (alpha u1 f1 - u2 f2)^n` over interior nodes.
pub fn v1_residual(
    before: &SystemState,
    after: &SystemState,
    params: &SystemParams,
    dt: f64,
) -> f64 {
    let g = before.grid;
    let (d, alpha) = (params.d, params.alpha);
    let h = g.dx();
    let c0 = before.combined(d, alpha);
    let c1 = after.combined(d, alpha);
    let mut sse = 0.0;
    for i in 1..g.n() - 1 {
        let lap = (c1.v_d[i + 1] - 2.0 * c1.v_d[i] + c1.v_d[i - 1]) / (h * h);
        let x = g.x(i);
        let (u, v) = (before.u1[i], before.u2[i]);
        let src = alpha * u * params.r1.eval(u, x) - v * params.r2.eval(v, x);
        let r = (c1.v_1[i] - c0.v_1[i]) / dt - lap - src;
        sse += r * r * h;
    }
    sse.sqrt()
}

/// Largest increase of `v_d(x + nL)` in `n` at fixed phase.
pub fn period_monotonicity_violation(state: &SystemState, d: f64, alpha: f64) -> f64 {
    let g = state.grid;
    let v = state.combined(d, alpha).v_d;
    let npp = g.nodes_per_period;
    let mut worst = 0.0f64;
    for i in npp..v.len() {
        worst = worst.max(v[i] - v[i - npp]);
    }
    worst
}
