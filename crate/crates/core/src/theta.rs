//! Half-line KPP problems and the interface-flux functional
//! `Theta(x0, f) = z'(x0)` where `-z'' = z f(z, x)` on `(x0, inf)`, `z(x0) = 0`.
//!
//! Everything the sign of the limiting speed depends on is assembled here:
//! the threshold profile `A_d`, the interval `R0`, its `d`-uniform bounds
//! `r_lo <= r_hi`, the segregated stationary equilibria obtained by gluing two
//! half-line solutions, and the sign integral.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics::{gauss_legendre, golden_minimize, solve_tridiagonal};
use crate::reaction::PeriodicReaction;

pub const DEFAULT_TRUNCATION: usize = 10;

/// Discretization of the half-line problems.
#[derive(Clone, Copy, Debug)]
pub struct HalfLineConfig {
    /// Truncation length in periods (at least 6).
    pub truncation_periods: usize,
    /// Upper bound on the step, in nodes per period.
    pub nodes_per_period: usize,
    /// Far-field decay lengths `1/sqrt(min f(0, .))` the domain must cover.
    pub min_decay_lengths: f64,
    /// Forces a given step; otherwise derived from the period and rates.
    pub step: Option<f64>,
}

impl Default for HalfLineConfig {
    fn default() -> Self {
        HalfLineConfig {
            truncation_periods: DEFAULT_TRUNCATION,
            nodes_per_period: 256,
            min_decay_lengths: 25.0,
            step: None,
        }
    }
}

impl HalfLineConfig {
    pub fn with_truncation(periods: usize) -> Self {
        HalfLineConfig {
            truncation_periods: periods,
            ..Default::default()
        }
    }

    /// `(step, node count)` for reaction `r`.
    fn grid(&self, r: &PeriodicReaction) -> (f64, usize) {
        let l = r.period();
        let h = self
            .step
            .unwrap_or_else(|| (l / self.nodes_per_period as f64).min(0.02 / r.m_max().sqrt()));
        let decay = self.min_decay_lengths / r.m_min().sqrt();
        let length = (self.truncation_periods as f64 * l).max(decay);
        let n = (length / h).ceil() as usize;
        (h, n.max(16))
    }
}

/// Growth rate of a homogeneous envelope problem `-z'' = z g(z)`.
#[derive(Clone)]
enum EnvelopeRate {
    /// `g(z) = slope (a - z)` with `slope` chosen by the sign of `a - z`.
    Logistic { a: f64, below: f64, above: f64 },
    /// Pointwise extremum over `x`, located by scan and refinement.
    Sampled { r: PeriodicReaction, lower: bool },
}

impl EnvelopeRate {
    fn lower(r: &PeriodicReaction) -> Self {
        Self::new(r, true)
    }

    fn upper(r: &PeriodicReaction) -> Self {
        Self::new(r, false)
    }

    fn new(r: &PeriodicReaction, lower: bool) -> Self {
        match r.logistic_rate() {
            Some(_) => {
                let a = r.zero_level();
                let (lo, hi) = (r.m_min() / a, r.m_max() / a);
                if lower {
                    EnvelopeRate::Logistic {
                        a,
                        below: lo,
                        above: hi,
                    }
                } else {
                    EnvelopeRate::Logistic {
                        a,
                        below: hi,
                        above: lo,
                    }
                }
            }
            None => EnvelopeRate::Sampled {
                r: r.clone(),
                lower,
            },
        }
    }

    /// `(g(z), g'(z))`.
    fn eval(&self, z: f64) -> (f64, f64) {
        match self {
            EnvelopeRate::Logistic { a, below, above } => {
                let s = if z <= *a { *below } else { *above };
                (s * (a - z), -s)
            }
            EnvelopeRate::Sampled { r, lower } => {
                let sign = if *lower { 1.0 } else { -1.0 };
                let l = r.period();
                let obj = |x: f64| Ok(sign * r.eval(z, x));
                let (x, _) = crate::numerics::periodic_minimize(obj, l, 64, 1e-9 * l)
                    .expect("envelope objective is infallible");
                (r.eval(z, x), r.eval_du(z, x))
            }
        }
    }
}

/// Positive solution of the truncated half-line problem.
#[derive(Clone, Debug, Serialize)]
pub struct HalfLineSolution {
    pub x0: f64,
    pub step: f64,
    /// `z` at `x0 + i step`, `z[0] = 0`.
    pub z: Vec<f64>,
    pub theta: f64,
}

impl HalfLineSolution {
    pub fn samples(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.z
            .iter()
            .enumerate()
            .map(move |(i, z)| (self.x0 + i as f64 * self.step, *z))
    }

    pub fn end(&self) -> f64 {
        self.x0 + (self.z.len() - 1) as f64 * self.step
    }
}

/// Damped Newton for the Numerov discretization of `-z'' = g(z, x)`,
/// `g = z * rate`, with `z(x0) = 0` and `z(end) = a`.
fn newton_numerov<G>(x0: f64, h: f64, n: usize, a: f64, init: Vec<f64>, rate: G) -> Result<Vec<f64>>
where
    G: Fn(f64, f64) -> (f64, f64),
{
    let mut z = init;
    debug_assert_eq!(z.len(), n + 1);
    z[0] = 0.0;
    z[n] = a;
    let c = h * h / 12.0;
    let xs: Vec<f64> = (0..=n).map(|i| x0 + i as f64 * h).collect();

    let source = |z: &[f64], g: &mut Vec<f64>, dg: &mut Vec<f64>| {
        g.clear();
        dg.clear();
        for (zi, xi) in z.iter().zip(&xs) {
            let (f, fu) = rate(*zi, *xi);
            g.push(zi * f);
            dg.push(f + zi * fu);
        }
    };
    let residual = |z: &[f64], g: &[f64], out: &mut Vec<f64>| -> f64 {
        out.clear();
        let mut norm = 0.0f64;
        for i in 1..n {
            let r = z[i + 1] - 2.0 * z[i] + z[i - 1] + c * (g[i + 1] + 10.0 * g[i] + g[i - 1]);
            norm += r * r;
            out.push(r);
        }
        norm.sqrt()
    };

    let (mut g, mut dg, mut res) = (Vec::new(), Vec::new(), Vec::new());
    source(&z, &mut g, &mut dg);
    let mut norm = residual(&z, &g, &mut res);
    let mut history = vec![norm];
    let m = n - 1;
    let (mut lower, mut diag, mut upper, mut scratch) =
        (vec![0.0; m], vec![0.0; m], vec![0.0; m], Vec::new());
    let tol = 1e-13 * a.max(1e-300) * (n as f64).sqrt();

    for _ in 0..100 {
        if norm <= tol {
            return Ok(z);
        }
        for k in 0..m {
            let i = k + 1;
            lower[k] = 1.0 + c * dg[i - 1];
            diag[k] = -2.0 + 10.0 * c * dg[i];
            upper[k] = 1.0 + c * dg[i + 1];
        }
        let mut step: Vec<f64> = res.iter().map(|r| -r).collect();
        solve_tridiagonal(&lower, &diag, &upper, &mut step, &mut scratch)?;

        let mut t = 1.0;
        let mut accepted = false;
        let mut trial = z.clone();
        let (mut tg, mut tdg, mut tres) = (Vec::new(), Vec::new(), Vec::new());
        for _ in 0..40 {
            for k in 0..m {
                trial[k + 1] = z[k + 1] + t * step[k];
            }
            source(&trial, &mut tg, &mut tdg);
            let tnorm = residual(&trial, &tg, &mut tres);
            if tnorm.is_finite() && tnorm < (1.0 - 1e-4 * t) * norm {
                std::mem::swap(&mut z, &mut trial);
                std::mem::swap(&mut g, &mut tg);
                std::mem::swap(&mut dg, &mut tdg);
                std::mem::swap(&mut res, &mut tres);
                norm = tnorm;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        history.push(norm);
        let max_step = step.iter().fold(0.0f64, |s, v| s.max(v.abs()));
        if !accepted {
            // Stagnation at round-off level counts as convergence.
            if norm <= 1e3 * tol || max_step <= 1e-14 * a {
                return Ok(z);
            }
            return Err(Error::NumericalFailure {
                what: format!("half-line Newton stalled; residual history {history:?}"),
                residual: norm,
            });
        }
        if max_step * t <= 1e-15 * a && norm <= 1e3 * tol {
            return Ok(z);
        }
    }
    Err(Error::NumericalFailure {
        what: format!("half-line Newton did not converge; residual history {history:?}"),
        residual: norm,
    })
}

/// Right-sided slope at the first node, fourth-order one-sided difference.
fn one_sided_slope(z: &[f64], h: f64) -> f64 {
    (-25.0 * z[0] + 48.0 * z[1] - 36.0 * z[2] + 16.0 * z[3] - 3.0 * z[4]) / (12.0 * h)
}

/// Solves `-z'' = z f(z, x)` on a truncated half-line for one reaction, with
/// the homogeneous sub- and super-solutions built from `min_x f` and `max_x f`.
///
/// The envelopes depend only on the set of values `f(z, .)` takes, so the
/// same solver serves every reflection `f(z, 2 x - .)` of the reaction.
pub struct HalfLineSolver {
    reaction: PeriodicReaction,
    step: f64,
    nodes: usize,
    sub: Vec<f64>,
    sup: Vec<f64>,
}

impl HalfLineSolver {
    pub fn new(r: &PeriodicReaction, cfg: HalfLineConfig) -> Result<Self> {
        if cfg.truncation_periods < 6 {
            return Err(Error::Domain(format!(
                "truncation must cover at least 6 periods, got {}",
                cfg.truncation_periods
            )));
        }
        let (step, nodes) = cfg.grid(r);
        let a = r.zero_level();
        let guess = |kappa: f64| -> Vec<f64> {
            (0..=nodes)
                .map(|i| a * (1.0 - (-kappa * i as f64 * step).exp()))
                .collect()
        };
        let lower = EnvelopeRate::lower(r);
        let upper = EnvelopeRate::upper(r);
        let sub = newton_numerov(0.0, step, nodes, a, guess(r.m_min().sqrt()), |z, _| {
            lower.eval(z)
        })?;
        let sup = newton_numerov(0.0, step, nodes, a, sub.clone(), |z, _| upper.eval(z))?;
        Ok(HalfLineSolver {
            reaction: r.clone(),
            step,
            nodes,
            sub,
            sup,
        })
    }

    pub fn reaction(&self) -> &PeriodicReaction {
        &self.reaction
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    /// `z'(0)` of the homogeneous problem with `min_x f`.
    pub fn sub_slope(&self) -> f64 {
        one_sided_slope(&self.sub, self.step)
    }

    /// `z'(0)` of the homogeneous problem with `max_x f`.
    pub fn super_slope(&self) -> f64 {
        one_sided_slope(&self.sup, self.step)
    }

    /// Half-line solution for the solver's reaction starting at `x0`.
    pub fn solve(&self, x0: f64) -> Result<HalfLineSolution> {
        self.solve_with(x0, &self.reaction)
    }

    /// Half-line solution for the reflection `f(z, 2 x0 - x)` starting at `x0`.
    pub fn solve_reflected(&self, x0: f64) -> Result<HalfLineSolution> {
        self.solve_with(x0, &self.reaction.reflect(x0))
    }

    fn solve_with(&self, x0: f64, r: &PeriodicReaction) -> Result<HalfLineSolution> {
        let a = r.zero_level();
        let z = newton_numerov(x0, self.step, self.nodes, a, self.sub.clone(), |z, x| {
            (r.eval(z, x), r.eval_du(z, x))
        })?;
        // Sub/super-solution sandwich; a violation would point at a second
        // positive solution.
        let tol = 1e-6 * a;
        let mut excess = 0.0f64;
        for ((zi, lo), hi) in z.iter().zip(&self.sub).zip(&self.sup) {
            excess = excess.max(lo - zi - tol).max(zi - hi - tol);
        }
        if excess > 0.0 {
            return Err(Error::EnvelopeViolation {
                excess: excess + tol,
            });
        }
        if z[1..].iter().any(|v| *v <= 0.0) {
            return Err(Error::NumericalFailure {
                what: "half-line solution is not positive".into(),
                residual: z.iter().cloned().fold(f64::INFINITY, f64::min),
            });
        }
        let theta = one_sided_slope(&z, self.step);
        Ok(HalfLineSolution {
            x0,
            step: self.step,
            z,
            theta,
        })
    }

    pub fn theta(&self, x0: f64) -> Result<f64> {
        Ok(self.solve(x0)?.theta)
    }

    pub fn theta_reflected(&self, x0: f64) -> Result<f64> {
        Ok(self.solve_reflected(x0)?.theta)
    }
}

/// Unique positive solution of `-z'' = z f(z, x)` on `[x0, x0 + N L]`.
pub fn solve_halfline(
    x0: f64,
    r: &PeriodicReaction,
    truncation_periods: usize,
) -> Result<HalfLineSolution> {
    HalfLineSolver::new(r, HalfLineConfig::with_truncation(truncation_periods))?.solve(x0)
}

/// `Theta(x0, f)`.
pub fn theta(x0: f64, r: &PeriodicReaction) -> Result<f64> {
    Ok(solve_halfline(x0, r, DEFAULT_TRUNCATION)?.theta)
}

/// Interface slopes of the two species' territories as functions of position.
///
/// `species1(x) = Theta(x, f1 reflected about x)` and
/// `species2(x) = d Theta(x, f2 / d)`, so that `A_d = species2 / species1`.
pub struct InterfaceSlopes {
    d: f64,
    one: HalfLineSolver,
    two: HalfLineSolver,
}

impl InterfaceSlopes {
    pub fn new(d: f64, r1: &PeriodicReaction, r2: &PeriodicReaction) -> Result<Self> {
        if !(d > 0.0) {
            return Err(Error::Domain(format!(
                "diffusion ratio must be positive, got {d}"
            )));
        }
        let cfg = HalfLineConfig::default();
        Ok(InterfaceSlopes {
            d,
            one: HalfLineSolver::new(r1, cfg)?,
            two: HalfLineSolver::new(&r2.scale_rate(1.0 / d)?, cfg)?,
        })
    }

    pub fn species1(&self, x: f64) -> Result<f64> {
        self.one.theta_reflected(x)
    }

    pub fn species2(&self, x: f64) -> Result<f64> {
        Ok(self.d * self.two.theta(x)?)
    }

    pub fn a_value(&self, x: f64) -> Result<f64> {
        Ok(self.species2(x)? / self.species1(x)?)
    }

    pub fn period(&self) -> f64 {
        self.one.reaction().period()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ThresholdProfile {
    pub d: f64,
    pub x_samples: Vec<f64>,
    pub a_values: Vec<f64>,
    pub a_min: f64,
    pub a_max: f64,
    pub argmin: f64,
    pub argmax: f64,
}

/// `(xs, values, (argmin, min), (argmax, max))`.
type Scan = (Vec<f64>, Vec<f64>, (f64, f64), (f64, f64));

/// Scan of `g` on `resolution` points of `[0, L)` plus golden refinement of both extrema.
fn scan_extrema<G>(g: G, period: f64, resolution: usize) -> Result<Scan>
where
    G: Fn(f64) -> Result<f64> + Sync,
{
    let xs: Vec<f64> = (0..resolution)
        .map(|i| period * i as f64 / resolution as f64)
        .collect();
    let values: Vec<f64> = xs.par_iter().map(|&x| g(x)).collect::<Result<_>>()?;
    let h = period / resolution as f64;
    let refine = |sign: f64| -> Result<(f64, f64)> {
        let (i, v) = values
            .iter()
            .enumerate()
            .map(|(i, v)| (i, sign * v))
            .fold((0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
        let (x, w) = golden_minimize(
            |x| Ok(sign * g(x)?),
            xs[i] - h,
            xs[i] + h,
            1e-6 * period.min(1.0),
        )?;
        Ok(if w < v {
            (x.rem_euclid(period), sign * w)
        } else {
            (xs[i], sign * v)
        })
    };
    let (lo, hi) = rayon::join(|| refine(1.0), || refine(-1.0));
    Ok((xs, values, lo?, hi?))
}

/// `A_d(x) = d Theta(x, f2/d) / Theta(x, f1 reflected about x)` on `[0, L)`.
pub fn a_profile(
    d: f64,
    r1: &PeriodicReaction,
    r2: &PeriodicReaction,
    resolution: usize,
) -> Result<ThresholdProfile> {
    let slopes = InterfaceSlopes::new(d, r1, r2)?;
    a_profile_from(&slopes, resolution)
}

fn a_profile_from(slopes: &InterfaceSlopes, resolution: usize) -> Result<ThresholdProfile> {
    let (xs, values, (argmin, a_min), (argmax, a_max)) =
        scan_extrema(|x| slopes.a_value(x), slopes.period(), resolution.max(2))?;
    Ok(ThresholdProfile {
        d: slopes.d,
        x_samples: xs,
        a_values: values,
        a_min,
        a_max,
        argmin,
        argmax,
    })
}

/// `(r_lo, r_hi)`, independent of `d`.
pub fn r_bounds(_d: f64, r1: &PeriodicReaction, r2: &PeriodicReaction) -> Result<(f64, f64)> {
    let species1 = HalfLineSolver::new(r1, HalfLineConfig::default())?;
    let species2 = HalfLineSolver::new(r2, HalfLineConfig::default())?;
    r_bounds_from(&species1, &species2)
}

fn r_bounds_from(species1: &HalfLineSolver, species2: &HalfLineSolver) -> Result<(f64, f64)> {
    let (_, _, (_, theta_min), (_, theta_max)) = scan_extrema(
        |x| species1.theta_reflected(x),
        species1.reaction().period(),
        128,
    )?;
    let r_lo = (species2.sub_slope() / theta_max).powi(2);
    let r_hi = (species2.super_slope() / theta_min).powi(2);
    Ok((r_lo, r_hi))
}

/// `[min A_d^2 / d, max A_d^2 / d]`, checked to nest inside `[r_lo, r_hi]`.
pub fn r0_interval(d: f64, r1: &PeriodicReaction, r2: &PeriodicReaction) -> Result<(f64, f64)> {
    let analysis = PairAnalysis::new(d, r1, r2)?;
    Ok(analysis.r0)
}

const NESTING_TOL: f64 = 1e-7;

/// The `d`-dependent threshold data of a reaction pair, computed once.
#[derive(Clone, Debug, Serialize)]
pub struct PairAnalysis {
    pub d: f64,
    pub profile: ThresholdProfile,
    pub r0: (f64, f64),
    pub r_lo: f64,
    pub r_hi: f64,
}

impl PairAnalysis {
    pub fn new(d: f64, r1: &PeriodicReaction, r2: &PeriodicReaction) -> Result<Self> {
        Self::with_resolution(d, r1, r2, 128)
    }

    pub fn with_resolution(
        d: f64,
        r1: &PeriodicReaction,
        r2: &PeriodicReaction,
        resolution: usize,
    ) -> Result<Self> {
        let slopes = InterfaceSlopes::new(d, r1, r2)?;
        let profile = a_profile_from(&slopes, resolution)?;
        let species2 = HalfLineSolver::new(r2, HalfLineConfig::default())?;
        let (r_lo, r_hi) = r_bounds_from(&slopes.one, &species2)?;
        let r0 = (profile.a_min.powi(2) / d, profile.a_max.powi(2) / d);
        let slack = NESTING_TOL * r_hi.max(1.0);
        if !(r_lo <= r0.0 + slack && r0.0 <= r0.1 && r0.1 <= r_hi + slack) {
            return Err(Error::Consistency(format!(
                "R0 = [{}, {}] not nested in [r_lo, r_hi] = [{r_lo}, {r_hi}]",
                r0.0, r0.1
            )));
        }
        Ok(PairAnalysis {
            d,
            profile,
            r0,
            r_lo,
            r_hi,
        })
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct EquilibriumSamples {
    pub x_e: f64,
    pub x: Vec<f64>,
    pub e: Vec<f64>,
    /// `|e'(x_e^-) - e'(x_e^+)|`.
    pub derivative_mismatch: f64,
    /// Discrete L2 norm of `-e'' - eta[e]` away from `x_e`.
    pub residual_l2: f64,
}

/// The limit nonlinearity `eta(z, x) = f1(z/alpha, x) z^+ - (1/d) f2(-z/d, x) z^-`.
pub fn eta(
    z: f64,
    x: f64,
    d: f64,
    alpha: f64,
    r1: &PeriodicReaction,
    r2: &PeriodicReaction,
) -> f64 {
    if z >= 0.0 {
        r1.eval(z / alpha, x) * z
    } else {
        -r2.eval(-z / d, x) * (-z) / d
    }
}

const GLUING_TOL: f64 = 1e-4;

/// Segregated stationary equilibrium with interface at `x_e`, built from the
/// reflected `alpha`-scaled species-1 half-line solution on the left and the
/// negated `d`-scaled species-2 solution on the right.
pub fn build_equilibrium(
    x_e: f64,
    d: f64,
    alpha: f64,
    r1: &PeriodicReaction,
    r2: &PeriodicReaction,
) -> Result<EquilibriumSamples> {
    if !(alpha > 0.0) {
        return Err(Error::Domain(format!(
            "alpha must be positive, got {alpha}"
        )));
    }
    let slopes = InterfaceSlopes::new(d, r1, r2)?;
    let a_d = slopes.a_value(x_e)?;

    let left_r = r1.reflect(x_e).rescale(alpha)?;
    let right_r = r2.scale_rate(1.0 / d)?.rescale(d)?;
    let h = {
        let hl = HalfLineConfig::default().grid(&left_r).0;
        let hr = HalfLineConfig::default().grid(&right_r).0;
        hl.min(hr)
    };
    let cfg = HalfLineConfig {
        step: Some(h),
        ..Default::default()
    };
    let left = HalfLineSolver::new(&left_r, cfg)?.solve(x_e)?;
    let right = HalfLineSolver::new(&right_r, cfg)?.solve(x_e)?;
    let mismatch = (left.theta - right.theta).abs();
    if (alpha - a_d).abs() > GLUING_TOL || mismatch > GLUING_TOL * left.theta.max(1.0) {
        return Err(Error::InvalidGluing {
            alpha,
            a_d,
            mismatch,
        });
    }

    // The truncation end points are pinned to the zero levels; keep interior nodes.
    let m = left.z.len().min(right.z.len()) - 2;
    let mut x = Vec::with_capacity(2 * m + 1);
    let mut e = Vec::with_capacity(2 * m + 1);
    for i in (1..=m).rev() {
        x.push(x_e - i as f64 * h);
        e.push(left.z[i]);
    }
    for i in 0..=m {
        x.push(x_e + i as f64 * h);
        e.push(-right.z[i]);
    }
    let center = m;
    let exclude = 2;
    let mut sum = 0.0;
    for i in 1..e.len() - 1 {
        if i.abs_diff(center) <= exclude {
            continue;
        }
        let lap = (e[i + 1] - 2.0 * e[i] + e[i - 1]) / (h * h);
        let r = -lap - eta(e[i], x[i], d, alpha, r1, r2);
        sum += r * r;
    }
    Ok(EquilibriumSamples {
        x_e,
        x,
        e,
        derivative_mismatch: mismatch,
        residual_l2: (sum * h).sqrt(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Prediction {
    Positive,
    Negative,
    ZeroInterval,
    /// `alpha^2/d` within the tolerance band of an end point of `R0`.
    BoundaryAmbiguous,
}

impl Prediction {
    pub fn label(self) -> &'static str {
        match self {
            Prediction::Positive => "positive",
            Prediction::Negative => "negative",
            Prediction::ZeroInterval => "zero-interval",
            Prediction::BoundaryAmbiguous => "boundary-ambiguous",
        }
    }

    pub fn sign(self) -> Option<i8> {
        match self {
            Prediction::Positive => Some(1),
            Prediction::Negative => Some(-1),
            Prediction::ZeroInterval => Some(0),
            Prediction::BoundaryAmbiguous => None,
        }
    }
}

pub const BOUNDARY_BAND: f64 = 1e-3;

#[derive(Clone, Debug, Serialize)]
pub struct SignReport {
    pub d: f64,
    pub alpha: f64,
    pub integral: f64,
    pub integral_error: f64,
    /// Sign of the integral, 0 when it is zero relative to the rate scale.
    pub integral_sign: i8,
    pub r0_interval: (f64, f64),
    pub r_lo: f64,
    pub r_hi: f64,
    pub ratio: f64,
    pub predicted: Prediction,
    /// Closed-form logistic sign `sign(alpha^2 a1^3 |mu1|_1 - d a2^3 |mu2|_1)`.
    pub logistic_sign: Option<i8>,
}

fn sign_integral_with(
    d: f64,
    alpha: f64,
    r1: &PeriodicReaction,
    r2: &PeriodicReaction,
    nz: usize,
    nx: usize,
) -> f64 {
    let (nodes, weights) = gauss_legendre(nz);
    let inner = |r: &PeriodicReaction, x: f64| -> f64 {
        let a = r.zero_level();
        nodes
            .iter()
            .zip(&weights)
            .map(|(t, w)| {
                let z = 0.5 * a * (t + 1.0);
                w * z * r.eval(z, x)
            })
            .sum::<f64>()
            * 0.5
            * a
    };
    let l = r1.period();
    let h = l / nx as f64;
    (0..nx)
        .map(|i| {
            let x = (i as f64 + 0.5) * h;
            alpha * alpha * inner(r1, x) - d * inner(r2, x)
        })
        .sum::<f64>()
        * h
}

/// `int_0^L (alpha^2 int_0^a1 z f1 dz - d int_0^a2 z f2 dz) dx` and an error estimate.
pub fn sign_integral(
    d: f64,
    alpha: f64,
    r1: &PeriodicReaction,
    r2: &PeriodicReaction,
) -> (f64, f64) {
    let fine = sign_integral_with(d, alpha, r1, r2, 64, 512);
    let coarse = sign_integral_with(d, alpha, r1, r2, 32, 256);
    (fine, (fine - coarse).abs())
}

fn sign_of(v: f64, scale: f64) -> i8 {
    if v.abs() <= 1e-12 * scale {
        0
    } else if v > 0.0 {
        1
    } else {
        -1
    }
}

/// Sign prediction for the limiting speed, from a precomputed pair analysis.
pub fn predict_sign_from(
    analysis: &PairAnalysis,
    alpha: f64,
    r1: &PeriodicReaction,
    r2: &PeriodicReaction,
) -> Result<SignReport> {
    let d = analysis.d;
    let (integral, integral_error) = sign_integral(d, alpha, r1, r2);
    let ratio = alpha * alpha / d;
    let (lo, hi) = analysis.r0;
    let predicted = if (ratio - lo).abs() < BOUNDARY_BAND || (ratio - hi).abs() < BOUNDARY_BAND {
        Prediction::BoundaryAmbiguous
    } else if ratio > hi {
        Prediction::Positive
    } else if ratio < lo {
        Prediction::Negative
    } else {
        Prediction::ZeroInterval
    };

    let scale = alpha * alpha * r1.rate_integral() * r1.zero_level().powi(2)
        + d * r2.rate_integral() * r2.zero_level().powi(2);
    let integral_sign = sign_of(integral, scale);
    let logistic_sign = match (r1.logistic_rate(), r2.logistic_rate()) {
        (Some(m1), Some(m2)) => {
            let v = alpha * alpha * r1.zero_level().powi(3) * m1.integral()
                - d * r2.zero_level().powi(3) * m2.integral();
            Some(sign_of(v, scale))
        }
        _ => None,
    };
    if let Some(s) = logistic_sign {
        if s != integral_sign {
            return Err(Error::Consistency(format!(
                "sign integral {integral:e} disagrees with the logistic closed form"
            )));
        }
    }
    if matches!(predicted, Prediction::Positive | Prediction::Negative)
        && Some(integral_sign) != predicted.sign()
    {
        return Err(Error::Consistency(format!(
            "alpha^2/d = {ratio} outside R0 = [{lo}, {hi}] predicts {} but the sign integral is {integral:e}",
            predicted.label()
        )));
    }
    Ok(SignReport {
        d,
        alpha,
        integral,
        integral_error,
        integral_sign,
        r0_interval: analysis.r0,
        r_lo: analysis.r_lo,
        r_hi: analysis.r_hi,
        ratio,
        predicted,
        logistic_sign,
    })
}

pub fn predict_sign(
    d: f64,
    alpha: f64,
    r1: &PeriodicReaction,
    r2: &PeriodicReaction,
) -> Result<SignReport> {
    let analysis = PairAnalysis::new(d, r1, r2)?;
    predict_sign_from(&analysis, alpha, r1, r2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reaction::sine_rate;

    fn homogeneous(mu: f64, a: f64) -> PeriodicReaction {
        PeriodicReaction::homogeneous(mu, a, 1.0).unwrap()
    }

    fn periodic() -> PeriodicReaction {
        PeriodicReaction::logistic(sine_rate(2.0, 1.0, 1.0), 1.0).unwrap()
    }

    /// `z'(0) = sqrt(mu a^3 / 3)` from the first integral of `-z'' = mu z (a - z)`.
    fn energy_slope(mu: f64, a: f64) -> f64 {
        (mu * a.powi(3) / 3.0).sqrt()
    }

    #[test]
    fn homogeneous_theta_matches_energy_identity() {
        for (mu, a) in [(1.0, 1.0), (3.0, 2.0), (0.5, 1.0)] {
            let t = theta(0.0, &homogeneous(mu, a)).unwrap();
            let e = energy_slope(mu, a);
            assert!(((t - e) / e).abs() < 1e-5, "mu={mu} a={a}: {t} vs {e}");
        }
    }

    #[test]
    fn half_line_solution_shape() {
        let r = periodic();
        let s = solve_halfline(0.3, &r, 10).unwrap();
        assert_eq!(s.z[0], 0.0);
        assert!(s.z[1..].iter().all(|z| *z > 0.0));
        let far = s.z[s.z.len() * 9 / 10];
        assert!((far - 1.0).abs() < 0.01);
        assert!(s.theta >= energy_slope(1.0, 1.0) && s.theta <= energy_slope(3.0, 1.0));
        assert!(matches!(solve_halfline(0.0, &r, 5), Err(Error::Domain(_))));
    }

    #[test]
    fn theta_is_periodic_in_x0() {
        let r = periodic();
        let solver = HalfLineSolver::new(&r, HalfLineConfig::default()).unwrap();
        for x0 in [0.0, 0.21, 0.6] {
            let a = solver.theta(x0).unwrap();
            let b = solver.theta(x0 + 1.0).unwrap();
            assert!((a - b).abs() < 1e-6, "{a} {b}");
        }
    }

    #[test]
    fn truncation_converged() {
        let r = periodic();
        let a = solve_halfline(0.4, &r, 10).unwrap().theta;
        let b = solve_halfline(0.4, &r, 20).unwrap().theta;
        assert!((a - b).abs() < 1e-7, "{a} {b}");
    }

    #[test]
    fn a_profile_homogeneous_closed_form() {
        let one = homogeneous(1.0, 1.0);
        let p = a_profile(2.0, &one, &one, 16).unwrap();
        for v in &p.a_values {
            assert!((v - 2f64.sqrt()).abs() < 1e-5);
        }
        let p1 = a_profile(1.0, &one, &one, 8).unwrap();
        assert!((p1.a_min - 1.0).abs() < 1e-6 && (p1.a_max - 1.0).abs() < 1e-6);
    }

    #[test]
    fn r_bounds_closed_forms() {
        let one = homogeneous(1.0, 1.0);
        let (lo, hi) = r_bounds(1.0, &one, &one).unwrap();
        assert!((lo - 1.0).abs() < 1e-6 && (hi - 1.0).abs() < 1e-6);
        let (lo, hi) = r_bounds(1.0, &one, &periodic()).unwrap();
        assert!(
            (lo - 1.0).abs() < 1e-6 && (hi - 3.0).abs() < 1e-5,
            "{lo} {hi}"
        );
    }

    #[test]
    fn sign_integral_closed_forms() {
        let one = homogeneous(1.0, 1.0);
        let two = homogeneous(2.0, 1.0);
        let (v, err) = sign_integral(1.0, 1.0, &one, &two);
        assert!((v + 1.0 / 6.0).abs() < 1e-12 && err < 1e-12);
        assert!(sign_integral(1.0, 1.0, &one, &one).0.abs() < 1e-15);
        assert!((sign_integral(1.0, 2.0, &one, &one).0 - 0.5).abs() < 1e-12);
    }

    #[test]
    fn predictions_for_homogeneous_pairs() {
        let one = homogeneous(1.0, 1.0);
        let two = homogeneous(2.0, 1.0);
        let rep = predict_sign(1.0, 2.0, &one, &one).unwrap();
        assert_eq!(rep.predicted, Prediction::Positive);
        assert_eq!(rep.logistic_sign, Some(1));
        assert!((rep.integral - 0.5).abs() < 1e-12);
        assert_eq!(
            predict_sign(1.0, 1.0, &one, &two).unwrap().predicted,
            Prediction::Negative
        );
        let rep = predict_sign(2.0, 2f64.sqrt(), &one, &one).unwrap();
        assert!(matches!(
            rep.predicted,
            Prediction::ZeroInterval | Prediction::BoundaryAmbiguous
        ));
    }

    #[test]
    fn gluing_closed_form_case() {
        let one = homogeneous(1.0, 1.0);
        let eq = build_equilibrium(0.0, 2.0, 2f64.sqrt(), &one, &one).unwrap();
        assert!(eq.derivative_mismatch < 1e-5, "{}", eq.derivative_mismatch);
        assert!(eq.residual_l2 < 1e-3, "{}", eq.residual_l2);
        assert!(eq.e.iter().all(|e| *e > -2.0 && *e < 2f64.sqrt()));
        let err = build_equilibrium(0.0, 2.0, 2f64.sqrt() + 0.1, &one, &one).unwrap_err();
        match err {
            Error::InvalidGluing { mismatch, .. } => assert!(mismatch > 1e-2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn symmetric_equilibrium_is_odd() {
        let r = periodic();
        let eq = build_equilibrium(0.25, 1.0, 1.0, &r, &r);
        // A_1 at a symmetry point of mu equals 1 only if mu is even about it.
        let a = InterfaceSlopes::new(1.0, &r, &r)
            .unwrap()
            .a_value(0.25)
            .unwrap();
        assert!((a - 1.0).abs() < 1e-6, "{a}");
        let eq = eq.unwrap();
        let m = eq.e.len() / 2;
        for k in 1..m {
            assert!((eq.e[m - k] + eq.e[m + k]).abs() < 1e-8);
        }
    }
}
