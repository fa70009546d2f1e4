//! Periodic KPP-type per-capita growth rates `f(u, x)`.
//!
//! A reaction is either the built-in logistic family `mu(x) (a - u)` with a
//! truncated Fourier coefficient, or a user closure. Both are closed under the
//! two transformations the limit problems need: reflection about a point and
//! rescaling of the density variable.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::periodic_minimize;

/// `mean + sum_k cosine[k-1] cos(2 pi k x / L) + sine[k-1] sin(2 pi k x / L)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FourierSeries {
    pub period: f64,
    pub mean: f64,
    pub cosine: Vec<f64>,
    pub sine: Vec<f64>,
}

impl FourierSeries {
    pub fn constant(value: f64, period: f64) -> Self {
        FourierSeries {
            period,
            mean: value,
            cosine: Vec::new(),
            sine: Vec::new(),
        }
    }

    fn modes(&self) -> usize {
        self.cosine.len().max(self.sine.len())
    }

    fn coeffs(&self, k: usize) -> (f64, f64) {
        (
            self.cosine.get(k).copied().unwrap_or(0.0),
            self.sine.get(k).copied().unwrap_or(0.0),
        )
    }

    pub fn eval(&self, x: f64) -> f64 {
        let w = 2.0 * PI / self.period;
        (0..self.modes()).fold(self.mean, |acc, k| {
            let (c, s) = self.coeffs(k);
            let (sn, cs) = (w * (k + 1) as f64 * x).sin_cos();
            acc + c * cs + s * sn
        })
    }

    pub fn derivative(&self, x: f64) -> f64 {
        let w = 2.0 * PI / self.period;
        (0..self.modes()).fold(0.0, |acc, k| {
            let (c, s) = self.coeffs(k);
            let wk = w * (k + 1) as f64;
            let (sn, cs) = (wk * x).sin_cos();
            acc + wk * (s * cs - c * sn)
        })
    }

    /// Integral over one period.
    pub fn integral(&self) -> f64 {
        self.mean * self.period
    }

    /// Coefficients of `x -> self(2 x0 - x)`.
    pub fn reflect(&self, x0: f64) -> Self {
        let w = 2.0 * PI / self.period;
        let n = self.modes();
        let mut cosine = vec![0.0; n];
        let mut sine = vec![0.0; n];
        for k in 0..n {
            let (c, s) = self.coeffs(k);
            let (s2, c2) = (2.0 * w * (k + 1) as f64 * x0).sin_cos();
            // cos(k(2x0 - x)) = c2 cos(kx) + s2 sin(kx)
            // sin(k(2x0 - x)) = s2 cos(kx) - c2 sin(kx)
            cosine[k] = c * c2 + s * s2;
            sine[k] = c * s2 - s * c2;
        }
        FourierSeries {
            period: self.period,
            mean: self.mean,
            cosine,
            sine,
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        FourierSeries {
            period: self.period,
            mean: self.mean * factor,
            cosine: self.cosine.iter().map(|c| c * factor).collect(),
            sine: self.sine.iter().map(|s| s * factor).collect(),
        }
    }
}

type Field = dyn Fn(f64, f64) -> f64 + Send + Sync;

#[derive(Clone)]
struct CustomFns {
    f: Arc<Field>,
    du: Arc<Field>,
    dx: Arc<Field>,
}

#[derive(Clone)]
enum Kind {
    Logistic { mu: FourierSeries },
    Custom(CustomFns),
}

/// An L-periodic per-capita growth rate with a constant positive zero.
#[derive(Clone)]
pub struct PeriodicReaction {
    period: f64,
    zero_level: f64,
    m_min: f64,
    m_max: f64,
    kind: Kind,
}

impl fmt::Debug for PeriodicReaction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match &self.kind {
            Kind::Logistic { mu } => format!("Logistic({mu:?})"),
            Kind::Custom(_) => "Custom".to_string(),
        };
        f.debug_struct("PeriodicReaction")
            .field("period", &self.period)
            .field("zero_level", &self.zero_level)
            .field("m_min", &self.m_min)
            .field("m_max", &self.m_max)
            .field("kind", &kind)
            .finish()
    }
}

const EXTREMA_SCAN: usize = 256;

impl PeriodicReaction {
    /// `f(u, x) = mu(x) (a - u)`.
    pub fn logistic(mu: FourierSeries, zero_level: f64) -> Result<Self> {
        if !(mu.period > 0.0) {
            return Err(Error::Domain(format!(
                "period must be positive, got {}",
                mu.period
            )));
        }
        if !(zero_level > 0.0) {
            return Err(Error::Domain(format!(
                "zero level must be positive, got {zero_level}"
            )));
        }
        let period = mu.period;
        let kind = Kind::Logistic { mu };
        let (m_min, m_max) = extrema(&kind, period, zero_level)?;
        Ok(PeriodicReaction {
            period,
            zero_level,
            m_min,
            m_max,
            kind,
        })
    }

    /// Space-homogeneous logistic rate `rate (a - u)`, nominally `period`-periodic.
    pub fn homogeneous(rate: f64, zero_level: f64, period: f64) -> Result<Self> {
        Self::logistic(FourierSeries::constant(rate, period), zero_level)
    }

    /// Reaction given by closures for `f`, `df/du` and `df/dx`.
    pub fn custom<F, Du, Dx>(period: f64, zero_level: f64, f: F, du: Du, dx: Dx) -> Result<Self>
    where
        F: Fn(f64, f64) -> f64 + Send + Sync + 'static,
        Du: Fn(f64, f64) -> f64 + Send + Sync + 'static,
        Dx: Fn(f64, f64) -> f64 + Send + Sync + 'static,
    {
        if !(period > 0.0) || !(zero_level > 0.0) {
            return Err(Error::Domain(
                "period and zero level must be positive".into(),
            ));
        }
        let kind = Kind::Custom(CustomFns {
            f: Arc::new(f),
            du: Arc::new(du),
            dx: Arc::new(dx),
        });
        let (m_min, m_max) = extrema(&kind, period, zero_level)?;
        Ok(PeriodicReaction {
            period,
            zero_level,
            m_min,
            m_max,
            kind,
        })
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn zero_level(&self) -> f64 {
        self.zero_level
    }

    /// `min_x f(0, x)`.
    pub fn m_min(&self) -> f64 {
        self.m_min
    }

    /// `max_x f(0, x)`.
    pub fn m_max(&self) -> f64 {
        self.m_max
    }

    /// The coefficient `mu` when the reaction belongs to the logistic family.
    pub fn logistic_rate(&self) -> Option<&FourierSeries> {
        match &self.kind {
            Kind::Logistic { mu } => Some(mu),
            Kind::Custom(_) => None,
        }
    }

    #[inline]
    pub fn eval(&self, u: f64, x: f64) -> f64 {
        eval_kind(&self.kind, self.zero_level, u, x)
    }

    #[inline]
    pub fn eval_du(&self, u: f64, x: f64) -> f64 {
        match &self.kind {
            Kind::Logistic { mu } => -mu.eval(x),
            Kind::Custom(c) => (c.du)(u, x),
        }
    }

    #[inline]
    pub fn eval_dx(&self, u: f64, x: f64) -> f64 {
        match &self.kind {
            Kind::Logistic { mu } => mu.derivative(x) * (self.zero_level - u),
            Kind::Custom(c) => (c.dx)(u, x),
        }
    }

    /// `(u, x) -> f(u, 2 x0 - x)`.
    pub fn reflect(&self, x0: f64) -> Self {
        let kind = match &self.kind {
            Kind::Logistic { mu } => Kind::Logistic { mu: mu.reflect(x0) },
            Kind::Custom(c) => {
                let (f, du, dx) = (c.f.clone(), c.du.clone(), c.dx.clone());
                Kind::Custom(CustomFns {
                    f: Arc::new(move |u, x| f(u, 2.0 * x0 - x)),
                    du: Arc::new(move |u, x| du(u, 2.0 * x0 - x)),
                    dx: Arc::new(move |u, x| -dx(u, 2.0 * x0 - x)),
                })
            }
        };
        PeriodicReaction {
            kind,
            ..self.clone()
        }
    }

    /// `(z, x) -> f(z / kappa, x)`; the zero level becomes `kappa a`.
    pub fn rescale(&self, kappa: f64) -> Result<Self> {
        if !(kappa > 0.0) || !kappa.is_finite() {
            return Err(Error::Domain(format!(
                "rescaling factor must be positive, got {kappa}"
            )));
        }
        let kind = match &self.kind {
            Kind::Logistic { mu } => Kind::Logistic {
                mu: mu.scaled(1.0 / kappa),
            },
            Kind::Custom(c) => {
                let (f, du, dx) = (c.f.clone(), c.du.clone(), c.dx.clone());
                Kind::Custom(CustomFns {
                    f: Arc::new(move |z, x| f(z / kappa, x)),
                    du: Arc::new(move |z, x| du(z / kappa, x) / kappa),
                    dx: Arc::new(move |z, x| dx(z / kappa, x)),
                })
            }
        };
        Ok(PeriodicReaction {
            period: self.period,
            zero_level: self.zero_level * kappa,
            m_min: self.m_min,
            m_max: self.m_max,
            kind,
        })
    }

    /// `(u, x) -> factor f(u, x)`, e.g. the `(1/d) f_2` of the species-2 limit problem.
    pub fn scale_rate(&self, factor: f64) -> Result<Self> {
        if !(factor > 0.0) || !factor.is_finite() {
            return Err(Error::Domain(format!(
                "rate factor must be positive, got {factor}"
            )));
        }
        let kind = match &self.kind {
            Kind::Logistic { mu } => Kind::Logistic {
                mu: mu.scaled(factor),
            },
            Kind::Custom(c) => {
                let (f, du, dx) = (c.f.clone(), c.du.clone(), c.dx.clone());
                Kind::Custom(CustomFns {
                    f: Arc::new(move |u, x| factor * f(u, x)),
                    du: Arc::new(move |u, x| factor * du(u, x)),
                    dx: Arc::new(move |u, x| factor * dx(u, x)),
                })
            }
        };
        Ok(PeriodicReaction {
            period: self.period,
            zero_level: self.zero_level,
            m_min: self.m_min * factor,
            m_max: self.m_max * factor,
            kind,
        })
    }

    /// `int_0^L f(0, x) dx`, exact for the logistic family and by composite
    /// midpoint otherwise.
    pub fn rate_integral(&self) -> f64 {
        match &self.kind {
            Kind::Logistic { mu } => mu.integral() * self.zero_level,
            Kind::Custom(_) => {
                let n = 1024;
                let h = self.period / n as f64;
                (0..n)
                    .map(|i| self.eval(0.0, (i as f64 + 0.5) * h))
                    .sum::<f64>()
                    * h
            }
        }
    }
}

#[inline]
fn eval_kind(kind: &Kind, a: f64, u: f64, x: f64) -> f64 {
    match kind {
        Kind::Logistic { mu } => mu.eval(x) * (a - u),
        Kind::Custom(c) => (c.f)(u, x),
    }
}

fn extrema(kind: &Kind, period: f64, a: f64) -> Result<(f64, f64)> {
    let f0 = |x: f64| {
        let v = eval_kind(kind, a, 0.0, x);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::MalformedReaction(format!("f(0, {x}) is not finite")))
        }
    };
    let (_, lo) = periodic_minimize(f0, period, EXTREMA_SCAN, 1e-10 * period)?;
    let (_, hi) = periodic_minimize(|x| f0(x).map(|v| -v), period, EXTREMA_SCAN, 1e-10 * period)?;
    Ok((lo, -hi))
}

/// Logistic reaction `mu(x)(1 - u)` together with `||mu||_{L^1}` over a period.
#[derive(Clone, Debug)]
pub struct LogisticReaction {
    pub mu: FourierSeries,
    pub mu_l1: f64,
}

impl LogisticReaction {
    pub fn new(mu: FourierSeries) -> Result<Self> {
        let n = 2048;
        let h = mu.period / n as f64;
        let mut l1 = 0.0;
        for i in 0..n {
            l1 += mu.eval((i as f64 + 0.5) * h).abs();
        }
        Ok(LogisticReaction { mu_l1: l1 * h, mu })
    }

    pub fn reaction(&self) -> Result<PeriodicReaction> {
        PeriodicReaction::logistic(self.mu.clone(), 1.0)
    }
}

/// Sampling resolution used by [`validate_hypotheses`].
#[derive(Clone, Copy, Debug)]
pub struct Sampling {
    pub nx: usize,
    pub nu: usize,
}

impl Default for Sampling {
    fn default() -> Self {
        Sampling { nx: 256, nu: 128 }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct HypothesisCheck {
    pub name: &'static str,
    pub passed: bool,
    /// Largest violation found (0 when passed).
    pub worst: f64,
    /// Where the worst violation was seen, as `(u, x)`.
    pub at: Option<(f64, f64)>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ValidationReport {
    pub checks: Vec<HypothesisCheck>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&HypothesisCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

struct Worst {
    value: f64,
    at: Option<(f64, f64)>,
}

impl Worst {
    fn new() -> Self {
        Worst {
            value: 0.0,
            at: None,
        }
    }

    fn record(&mut self, violation: f64, u: f64, x: f64) {
        if violation > self.value {
            self.value = violation;
            self.at = Some((u, x));
        }
    }

    fn into_check(self, name: &'static str) -> HypothesisCheck {
        HypothesisCheck {
            name,
            passed: self.value == 0.0,
            worst: self.value,
            at: self.at,
        }
    }
}

/// Sampling-based audit of the standing hypotheses on `[0, 2a] x [0, L]`.
pub fn validate_hypotheses(r: &PeriodicReaction, samples: Sampling) -> Result<ValidationReport> {
    let nx = samples.nx.max(2);
    let nu = samples.nu.max(2);
    let a = r.zero_level();
    let l = r.period();
    let finite = |v: f64, what: &str, u: f64, x: f64| {
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::MalformedReaction(format!("{what}({u}, {x}) = {v}")))
        }
    };

    let mut regularity = Worst::new();
    let mut positivity = Worst::new();
    let mut monotone = Worst::new();
    let mut zero = Worst::new();
    let mut periodic = Worst::new();
    let mut bounds = Worst::new();

    if r.m_min() <= 0.0 {
        positivity.record(-r.m_min() + f64::MIN_POSITIVE, 0.0, f64::NAN);
    }

    let hu = 1e-3;
    for i in 0..nx {
        let x = l * i as f64 / nx as f64;
        let f0 = finite(r.eval(0.0, x), "f", 0.0, x)?;
        let below = (r.m_min() - f0).max(0.0);
        let above = (f0 - r.m_max()).max(0.0);
        bounds.record((below + above) - 1e-12 * (1.0 + f0.abs()), 0.0, x);

        let fa = finite(r.eval(a, x), "f", a, x)?;
        zero.record(fa.abs() - 1e-10 * (1.0 + r.m_max()), a, x);

        for j in 0..nu {
            let u = 2.0 * a * j as f64 / (nu - 1) as f64;
            let f = finite(r.eval(u, x), "f", u, x)?;
            let fu = finite(r.eval_du(u, x), "df/du", u, x)?;
            let fx = finite(r.eval_dx(u, x), "df/dx", u, x)?;

            let shifted = finite(r.eval(u, x + l), "f", u, x + l)?;
            periodic.record((shifted - f).abs() - 1e-12 * (1.0 + f.abs()), u, x);

            // Strict decrease: analytic slope and a forward finite difference.
            let fd = (r.eval(u + hu, x) - f) / hu;
            if fu >= 0.0 || fd >= 0.0 {
                monotone.record(fu.max(fd).max(f64::MIN_POSITIVE), u, x);
            }

            let (fu_fd, fx_fd) = centered_differences(r, u, x);
            for (analytic, numeric) in [(fu, fu_fd), (fx, fx_fd)] {
                let scale = analytic.abs().max(numeric.abs());
                regularity.record((analytic - numeric).abs() - 1e-5 * scale - 1e-8, u, x);
            }
        }
    }

    Ok(ValidationReport {
        checks: vec![
            regularity.into_check("H1"),
            positivity.into_check("H2"),
            monotone.into_check("H3"),
            zero.into_check("zero_level"),
            periodic.into_check("periodicity"),
            bounds.into_check("bounds"),
        ],
    })
}

fn centered_differences(r: &PeriodicReaction, u: f64, x: f64) -> (f64, f64) {
    let hu = 1e-5 * (1.0 + u.abs());
    let hx = 1e-5 * r.period();
    let du = if u >= hu {
        (r.eval(u + hu, x) - r.eval(u - hu, x)) / (2.0 * hu)
    } else {
        (-3.0 * r.eval(u, x) + 4.0 * r.eval(u + hu, x) - r.eval(u + 2.0 * hu, x)) / (2.0 * hu)
    };
    let dx = (r.eval(u, x + hx) - r.eval(u, x - hx)) / (2.0 * hx);
    (du, dx)
}

/// `mu(x) = 2 + sin(2 pi x / L)` style coefficient used throughout the tests
/// and examples: `mean + amp sin(2 pi x / L)`.
pub fn sine_rate(mean: f64, amp: f64, period: f64) -> FourierSeries {
    FourierSeries {
        period,
        mean,
        cosine: vec![],
        sine: vec![amp],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn periodic_logistic() -> PeriodicReaction {
        PeriodicReaction::logistic(sine_rate(2.0, 1.0, 1.0), 1.0).unwrap()
    }

    #[test]
    fn homogeneous_logistic_passes() {
        let r = PeriodicReaction::homogeneous(1.0, 1.0, 1.0).unwrap();
        let rep = validate_hypotheses(&r, Sampling::default()).unwrap();
        assert!(rep.passed(), "{rep:?}");
        assert_eq!(r.zero_level(), 1.0);
    }

    #[test]
    fn periodic_logistic_extrema() {
        let r = periodic_logistic();
        let rep = validate_hypotheses(&r, Sampling::default()).unwrap();
        assert!(rep.passed(), "{rep:?}");
        assert!((r.m_min() - 1.0).abs() < 1e-12);
        assert!((r.m_max() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn non_decreasing_rate_fails_h3_at_zero() {
        let r = PeriodicReaction::custom(
            1.0,
            1.0,
            |u, _| (1.0 + u) * (1.0 - u),
            |u, _| -2.0 * u,
            |_, _| 0.0,
        )
        .unwrap();
        let rep = validate_hypotheses(&r, Sampling::default()).unwrap();
        let h3 = rep.check("H3").unwrap();
        assert!(!h3.passed);
        assert_eq!(h3.at.unwrap().0, 0.0);
        assert!(rep.check("H1").unwrap().passed);
        assert!(rep.check("H2").unwrap().passed);
        assert!(rep.check("zero_level").unwrap().passed);
    }

    #[test]
    fn non_finite_output_is_malformed() {
        let r = PeriodicReaction::custom(
            1.0,
            1.0,
            |u, x| {
                if u > 1.5 && x < 0.5 {
                    f64::NAN
                } else {
                    1.0 - u
                }
            },
            |_, _| -1.0,
            |_, _| 0.0,
        )
        .unwrap();
        assert!(matches!(
            validate_hypotheses(&r, Sampling::default()),
            Err(Error::MalformedReaction(_))
        ));
    }

    #[test]
    fn reflection_of_sine_coefficient() {
        let r = periodic_logistic().reflect(0.0);
        for i in 0..50 {
            let x = i as f64 / 37.0;
            let expected = 2.0 - (2.0 * PI * x).sin();
            assert!((r.eval(0.0, x) - expected).abs() < 1e-13);
        }
    }

    #[test]
    fn reflection_of_homogeneous_is_identity() {
        let r = PeriodicReaction::homogeneous(1.5, 2.0, 1.0).unwrap();
        let g = r.reflect(0.37);
        for i in 0..20 {
            let (u, x) = (0.1 * i as f64, 0.13 * i as f64);
            assert_eq!(r.eval(u, x), g.eval(u, x));
        }
    }

    #[test]
    fn rescale_homogeneous() {
        let r = PeriodicReaction::homogeneous(1.0, 1.0, 1.0).unwrap();
        let g = r.rescale(2.0).unwrap();
        assert_eq!(g.zero_level(), 2.0);
        for i in 0..20 {
            let z = 0.1 * i as f64;
            assert!((g.eval(z, 0.3) - (1.0 - z / 2.0)).abs() < 1e-15);
        }
        assert!(r.rescale(0.0).is_err());
        assert!(r.rescale(-1.0).is_err());
    }

    #[test]
    fn rescale_identity_and_inverse_d() {
        let r = periodic_logistic();
        let same = r.rescale(1.0).unwrap();
        let d = 3.0;
        let composite = r.scale_rate(1.0 / d).unwrap().rescale(d).unwrap();
        for i in 0..30 {
            let (z, x) = (0.1 * i as f64, 0.071 * i as f64);
            assert_eq!(same.eval(z, x), r.eval(z, x));
            let expected = r.eval(z / d, x) / d;
            assert!((composite.eval(z, x) - expected).abs() < 1e-14);
        }
        assert!((composite.zero_level() - d).abs() < 1e-15);
    }

    #[test]
    fn custom_transforms_follow_definitions() {
        let r = PeriodicReaction::custom(
            1.0,
            1.0,
            |u, x| (1.5 + (2.0 * PI * x).cos()) * (1.0 - u * u),
            |u, x| -2.0 * u * (1.5 + (2.0 * PI * x).cos()),
            |u, x| -2.0 * PI * (2.0 * PI * x).sin() * (1.0 - u * u),
        )
        .unwrap();
        let g = r.reflect(0.2).rescale(2.0).unwrap();
        let rep = validate_hypotheses(&g, Sampling { nx: 32, nu: 16 }).unwrap();
        assert!(rep.check("H1").unwrap().passed, "{rep:?}");
        assert!((g.eval(1.0, 0.7) - r.eval(0.5, 0.4 - 0.7)).abs() < 1e-14);
        assert!((r.m_min() - 0.5).abs() < 1e-10 && (r.m_max() - 2.5).abs() < 1e-10);
    }

    #[test]
    fn mu_l1_matches_quadrature() {
        let lr = LogisticReaction::new(sine_rate(2.0, 1.0, 1.0)).unwrap();
        assert!((lr.mu_l1 - 2.0).abs() < 1e-12);
        let r = lr.reaction().unwrap();
        assert!((r.rate_integral() - 2.0).abs() < 1e-12);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn reflect_is_an_involution(x0 in -3.0f64..3.0, x in -2.0f64..2.0, u in 0.0f64..2.0,
                                        c1 in -0.5f64..0.5, s1 in -0.5f64..0.5, s2 in -0.3f64..0.3) {
                let mu = FourierSeries { period: 1.3, mean: 2.0, cosine: vec![c1], sine: vec![s1, s2] };
                let r = PeriodicReaction::logistic(mu, 1.0).unwrap();
                let back = r.reflect(x0).reflect(x0);
                prop_assert!((back.eval(u, x) - r.eval(u, x)).abs() < 1e-12);
                prop_assert!((r.reflect(x0).eval(u, x) - r.eval(u, 2.0 * x0 - x)).abs() < 1e-12);
            }

            #[test]
            fn rescale_composes(k1 in 0.1f64..5.0, k2 in 0.1f64..5.0, z in 0.0f64..3.0, x in 0.0f64..1.0) {
                let r = PeriodicReaction::logistic(sine_rate(2.0, 1.0, 1.0), 1.0).unwrap();
                let a = r.rescale(k2).unwrap().rescale(k1).unwrap();
                let b = r.rescale(k1 * k2).unwrap();
                prop_assert!((a.eval(z, x) - b.eval(z, x)).abs() < 1e-12 * (1.0 + b.eval(z, x).abs()));
                prop_assert!((a.zero_level() - b.zero_level()).abs() < 1e-12 * b.zero_level());
            }

            #[test]
            fn periodic_in_x(u in 0.0f64..2.0, x in -5.0f64..5.0) {
                let r = PeriodicReaction::logistic(sine_rate(2.0, 1.0, 1.0), 1.0).unwrap();
                let f = r.eval(u, x);
                prop_assert!((r.eval(u, x + 1.0) - f).abs() <= 1e-12 * (1.0 + f.abs()));
            }
        }
    }
}
