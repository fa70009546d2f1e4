//! Experiment configs and sweeps over `(d, alpha, k)`. Measured speeds are
//! joined with the analytic sign predictions and written out as verdicts and
//! report files.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analysis::{
    estimate_speed_from_log, extract_free_boundary, normalize, reconstruct_profile, xi_prime_check,
    FluxStencil, FreeBoundaryTrace, SpeedConfig, SpeedEstimate, XiPrimeReport, C_FLOOR,
};
use crate::error::{Error, Result};
use crate::numerics::linear_fit;
use crate::plot::{Plot, Style, PALETTE};
use crate::reaction::{
    validate_hypotheses, FourierSeries, PeriodicReaction, Sampling, ValidationReport,
};
use crate::scalar_kpp::speed_bracket;
use crate::sim::{
    initial_front, run_until_front, snapshot_around, snapshot_file_name, write_snapshot_csv,
    Crossing, Grid1D, ProbeConfig, Snapshot, SystemParams, SystemState,
};
use crate::theta::{predict_sign_from, PairAnalysis, SignReport};

/// Logistic rate `mu(x) (a - u)` with `mu` a truncated Fourier series.
#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ReactionSpec {
    pub a: f64,
    pub mean: f64,
    #[serde(default)]
    pub fourier_cosine: Vec<f64>,
    #[serde(default)]
    pub fourier_sine: Vec<f64>,
}

impl ReactionSpec {
    pub fn build(&self, period: f64) -> Result<PeriodicReaction> {
        PeriodicReaction::logistic(
            FourierSeries {
                period,
                mean: self.mean,
                cosine: self.fourier_cosine.clone(),
                sine: self.fourier_sine.clone(),
            },
            self.a,
        )
    }
}

/// A scalar, an explicit list, or `count` evenly spaced values.
#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(untagged)]
pub enum ValueSpec {
    Scalar(f64),
    List(Vec<f64>),
    Range { from: f64, to: f64, count: usize },
}

impl ValueSpec {
    pub fn values(&self) -> Vec<f64> {
        match self {
            ValueSpec::Scalar(v) => vec![*v],
            ValueSpec::List(v) => v.clone(),
            ValueSpec::Range { from, to, count } => match count {
                0 => Vec::new(),
                1 => vec![*from],
                n => (0..*n)
                    .map(|i| from + (to - from) * i as f64 / (n - 1) as f64)
                    .collect(),
            },
        }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct GridSpec {
    pub nodes_per_period: usize,
    pub periods: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            nodes_per_period: 256,
            periods: 40,
        }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct RunSpec {
    /// First integration horizon; doubled until the speed is resolved.
    pub horizon: f64,
    pub max_horizon: f64,
    pub output_interval: f64,
    /// Fixed time step; the stability default is used when absent.
    pub dt: Option<f64>,
    pub workers: usize,
}

impl Default for RunSpec {
    fn default() -> Self {
        RunSpec {
            horizon: 40.0,
            max_horizon: 320.0,
            output_interval: 0.05,
            dt: None,
            workers: 4,
        }
    }
}

/// Initial interface width and position (in periods from the window centre).
#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SeedSpec {
    pub width: f64,
    #[serde(default)]
    pub offset: f64,
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct FreeBoundarySpec {
    pub d: f64,
    pub alpha: f64,
    pub k: f64,
    #[serde(default = "default_fb_resolutions")]
    pub resolutions: Vec<usize>,
    #[serde(default = "default_fb_horizon")]
    pub horizon: f64,
    /// Trailing fraction of the run whose snapshots enter the trace.
    #[serde(default = "default_fb_tail")]
    pub tail_fraction: f64,
}

fn default_fb_resolutions() -> Vec<usize> {
    vec![128, 256]
}

fn default_fb_horizon() -> f64 {
    40.0
}

fn default_fb_tail() -> f64 {
    0.4
}

fn default_period() -> f64 {
    1.0
}

fn default_seeds() -> Vec<SeedSpec> {
    vec![SeedSpec {
        width: 1.0,
        offset: 0.0,
    }]
}

fn default_margin() -> f64 {
    0.2
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    #[serde(default = "default_period")]
    pub period: f64,
    pub d: ValueSpec,
    pub alpha: ValueSpec,
    pub k_schedule: Vec<f64>,
    #[serde(default)]
    pub d_exis_check: bool,
    /// Sign agreement is asserted only where `alpha^2/d` is this far outside `R0`.
    #[serde(default = "default_margin")]
    pub sign_margin: f64,
    pub species1: ReactionSpec,
    pub species2: ReactionSpec,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default)]
    pub run: RunSpec,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<SeedSpec>,
    #[serde(default)]
    pub free_boundary: Option<FreeBoundarySpec>,
}

/// Command-line overrides applied on top of a config file.
#[derive(Clone, Debug, Default, Serialize)]
pub struct Overrides {
    pub workers: Option<usize>,
    pub resolution: Option<usize>,
    pub horizon: Option<f64>,
}

/// A parsed config together with its source text and content hash.
#[derive(Clone, Debug)]
pub struct LoadedConfig {
    pub config: ExperimentConfig,
    pub source: String,
    /// Hex SHA-256 of the source bytes.
    pub hash: String,
    pub overrides: Overrides,
}

impl LoadedConfig {
    pub fn from_toml_str(source: &str) -> Result<Self> {
        let config: ExperimentConfig =
            toml::from_str(source).map_err(|e| Error::Config(e.to_string()))?;
        Ok(LoadedConfig {
            config,
            source: source.to_string(),
            hash: content_hash(source.as_bytes()),
            overrides: Overrides::default(),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let source = std::fs::read_to_string(path)?;
        Self::from_toml_str(&source)
    }

    pub fn with_overrides(mut self, o: Overrides) -> Self {
        if let Some(w) = o.workers {
            self.config.run.workers = w;
        }
        if let Some(r) = o.resolution {
            self.config.grid.nodes_per_period = r;
        }
        if let Some(h) = o.horizon {
            self.config.run.horizon = h;
            self.config.run.max_horizon = self.config.run.max_horizon.max(h);
        }
        self.overrides = o;
        self
    }
}

pub fn content_hash(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// `max{M1 / a2, M2 / (alpha a1)}`: below this the kinetic system is not bistable.
pub fn k_bistable(alpha: f64, r1: &PeriodicReaction, r2: &PeriodicReaction) -> f64 {
    (r1.m_max() / r2.zero_level()).max(r2.m_max() / (alpha * r1.zero_level()))
}

/// `M2 (L/pi - 1/sqrt(M1))^2` when `L sqrt(M1) > pi`, else 0.
pub fn d_exis(r1: &PeriodicReaction, r2: &PeriodicReaction) -> f64 {
    let l = r1.period();
    let (m1, m2) = (r1.m_max(), r2.m_max());
    if l * m1.sqrt() > std::f64::consts::PI {
        m2 * (l / std::f64::consts::PI - 1.0 / m1.sqrt()).powi(2)
    } else {
        0.0
    }
}

/// High-frequency condition `L < pi (1/sqrt(M1) + sqrt(d/M2))`.
pub fn h_freq(d: f64, r1: &PeriodicReaction, r2: &PeriodicReaction) -> bool {
    r1.period() < std::f64::consts::PI * (1.0 / r1.m_max().sqrt() + (d / r2.m_max()).sqrt())
}

/// The reactions and parameter lists of a structurally valid config.
#[derive(Clone, Debug)]
pub struct Validated {
    pub r1: PeriodicReaction,
    pub r2: PeriodicReaction,
    pub ds: Vec<f64>,
    pub alphas: Vec<f64>,
}

impl ExperimentConfig {
    /// Structural checks; the bistability requirement on `k` is separate
    /// (see [`ExperimentConfig::check_k_schedule`]) so audits can report it.
    pub fn validate(&self) -> Result<Validated> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.period > 0.0) {
            return bad(format!("period must be positive, got {}", self.period));
        }
        let r1 = self.species1.build(self.period)?;
        let r2 = self.species2.build(self.period)?;
        let ds = self.d.values();
        let alphas = self.alpha.values();
        if ds.is_empty() || alphas.is_empty() {
            return bad("d and alpha need at least one value".into());
        }
        if ds
            .iter()
            .chain(&alphas)
            .any(|v| !(*v > 0.0) || !v.is_finite())
        {
            return bad("d and alpha must be positive".into());
        }
        if self.k_schedule.is_empty() || self.k_schedule.windows(2).any(|w| !(w[1] > w[0])) {
            return bad("k_schedule must be non-empty and strictly increasing".into());
        }
        Grid1D::new(
            self.period,
            self.grid.nodes_per_period,
            self.grid.periods,
            0,
        )
        .map_err(|e| Error::Config(e.to_string()))?;
        let run = &self.run;
        if !(run.horizon > 0.0)
            || !(run.max_horizon >= run.horizon)
            || !(run.output_interval > 0.0)
            || run.workers == 0
        {
            return bad(
                "run needs horizon > 0, max_horizon >= horizon, output_interval > 0, workers >= 1"
                    .into(),
            );
        }
        if run.dt.is_some_and(|dt| !(dt > 0.0)) {
            return bad("dt must be positive".into());
        }
        let half = self.grid.periods as f64 / 2.0 - ProbeConfig::default().guard_periods as f64;
        if self.seeds.is_empty()
            || self
                .seeds
                .iter()
                .any(|s| !(s.width > 0.0) || s.offset.abs() >= half)
        {
            return bad(format!(
                "seeds need width > 0 and |offset| < {half} periods"
            ));
        }
        if !(self.sign_margin >= 0.0) {
            return bad("sign_margin must be non-negative".into());
        }
        if let Some(fb) = &self.free_boundary {
            if fb.resolutions.is_empty()
                || fb.resolutions.iter().any(|n| *n < 64)
                || !(fb.tail_fraction > 0.0 && fb.tail_fraction < 1.0)
            {
                return bad(
                    "free_boundary needs resolutions >= 64 and 0 < tail_fraction < 1".into(),
                );
            }
        }
        Ok(Validated { r1, r2, ds, alphas })
    }

    /// Every `k` must exceed the bistability threshold of every `alpha`.
    pub fn check_k_schedule(&self, v: &Validated) -> Verdict {
        let worst = v
            .alphas
            .iter()
            .map(|a| k_bistable(*a, &v.r1, &v.r2))
            .fold(0.0, f64::max);
        let kmin = self.k_schedule.first().copied().unwrap_or(0.0);
        Verdict::new(
            "k_schedule_above_bistable",
            kmin > worst,
            format!("min k = {kmin}, max over alpha of k_bistable = {worst:.6}"),
        )
    }
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct Verdict {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Verdict {
    pub fn new(name: &str, passed: bool, detail: String) -> Self {
        Verdict {
            name: name.into(),
            passed,
            detail,
        }
    }
}

/// Result of one simulation in a sweep.
#[derive(Clone, Debug, Serialize)]
pub struct RunRecord {
    pub config_hash: String,
    pub point: usize,
    pub d: f64,
    pub alpha: f64,
    pub k: f64,
    pub seed: usize,
    /// Estimate on the level matching the sign convention, and on the other level.
    pub c_measured: Option<SpeedEstimate>,
    pub c_other_level: Option<SpeedEstimate>,
    /// Mean of `int u1 u2 dx` over the speed window.
    pub seg_index: Option<f64>,
    pub horizon: f64,
    pub dt: f64,
    pub clamp_fraction: f64,
    pub recenterings: usize,
    pub bracket: (f64, f64),
    pub verdicts: BTreeMap<String, bool>,
    pub artifacts: Vec<String>,
    pub error: Option<String>,
    #[serde(skip)]
    pub final_snapshot: Option<Snapshot>,
    #[serde(skip)]
    pub crossings: Vec<Crossing>,
}

impl RunRecord {
    pub fn tag(&self) -> String {
        format!("p{:02}_k{}_s{}", self.point, self.k, self.seed)
    }

    pub fn ok(&self) -> bool {
        self.error.is_none() && self.verdicts.values().all(|v| *v)
    }
}

/// Relative change between successive horizons accepted as converged; the
/// size of the time-discretization error at the default step.
pub const CONVERGENCE_REL: f64 = 1e-3;

/// Output of [`simulate_front`].
#[derive(Clone, Debug)]
pub struct FrontRun {
    pub state: SystemState,
    pub crossings: Vec<Crossing>,
    pub snapshots: Vec<Snapshot>,
    pub estimate: Result<(SpeedEstimate, SpeedEstimate), String>,
    pub horizon: f64,
    pub dt: f64,
    pub recenterings: usize,
    /// The last two estimates (on disjoint windows) agree within two combined
    /// stderr or [`CONVERGENCE_REL`], whichever is looser, or both lie in the
    /// stationary band `|c| <= C_FLOOR`.
    pub converged: bool,
}

/// Runs from front-like data, doubling the horizon until the speed estimate
/// is precise, outside the ambiguous band and consistent with the estimate
/// before the last doubling, or until `max_horizon` is reached.
/// Snapshots are kept for the trailing `snapshot_tail` fraction of the last stretch.
pub fn simulate_front(
    params: &SystemParams,
    grid: &GridSpec,
    run: &RunSpec,
    seed: &SeedSpec,
    snapshot_tail: Option<f64>,
) -> Result<FrontRun> {
    let l = params.r1.period();
    let g = Grid1D::new(
        l,
        grid.nodes_per_period,
        grid.periods,
        -((grid.periods / 2) as i64),
    )?;
    let mut state = initial_front(g, params.a1(), params.a2(), seed.offset * l, seed.width)?;
    let dt = run.dt.unwrap_or_else(|| params.default_dt());
    let speed_cfg = SpeedConfig::new(l);
    let mut crossings: Vec<Crossing> = Vec::new();
    let mut total = 0.0;
    let mut chunk = run.horizon;
    let mut recenterings = 0;
    let mut prev: Option<SpeedEstimate> = None;
    loop {
        let probe = ProbeConfig {
            output_interval: run.output_interval,
            snapshot_from: snapshot_tail.map_or(f64::INFINITY, |f| (1.0 - f) * chunk),
            ..ProbeConfig::default()
        };
        let out = run_until_front(state, params, chunk, dt, &probe)?;
        let skip = usize::from(!crossings.is_empty());
        crossings.extend_from_slice(&out.crossings[skip..]);
        recenterings += out.recenterings;
        state = out.state;
        total += chunk;
        let est = estimate_speed_from_log(&crossings, &speed_cfg);
        let (settled, agrees) = match &est {
            Ok((a, _)) => {
                let agrees = prev.is_some_and(|p: SpeedEstimate| {
                    let tol = (2.0 * (a.stderr.powi(2) + p.stderr.powi(2)).sqrt())
                        .max(CONVERGENCE_REL * a.c.abs().max(C_FLOOR));
                    let stationary = a.c.abs() <= C_FLOOR && p.c.abs() <= C_FLOOR;
                    p.is_precise() && ((a.c - p.c).abs() <= tol || stationary)
                });
                (a.is_precise() && !a.is_ambiguous() && agrees, agrees)
            }
            Err(Error::InsufficientData(_)) => (false, false),
            Err(_) => (true, false),
        };
        if let Ok((a, _)) = &est {
            prev = Some(*a);
        }
        if settled || total >= run.max_horizon - 1e-9 {
            return Ok(FrontRun {
                converged: agrees,
                state,
                crossings,
                snapshots: out.snapshots,
                estimate: est.map_err(|e| e.to_string()),
                horizon: total,
                dt,
                recenterings,
            });
        }
        chunk = total.min(run.max_horizon - total);
    }
}

fn mean_overlap(crossings: &[Crossing], from: f64) -> Option<f64> {
    let v: Vec<f64> = crossings
        .iter()
        .filter(|c| c.t >= from - 1e-12)
        .map(|c| c.overlap)
        .collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

#[derive(Clone, Debug)]
struct Job {
    point: usize,
    d: f64,
    alpha: f64,
    k: f64,
    seed: usize,
}

fn run_job(
    job: &Job,
    cfg: &ExperimentConfig,
    v: &Validated,
    bracket: (f64, f64),
    hash: &str,
) -> RunRecord {
    let mut rec = RunRecord {
        config_hash: hash.to_string(),
        point: job.point,
        d: job.d,
        alpha: job.alpha,
        k: job.k,
        seed: job.seed,
        c_measured: None,
        c_other_level: None,
        seg_index: None,
        horizon: 0.0,
        dt: 0.0,
        clamp_fraction: 0.0,
        recenterings: 0,
        bracket,
        verdicts: BTreeMap::new(),
        artifacts: Vec::new(),
        error: None,
        final_snapshot: None,
        crossings: Vec::new(),
    };
    let outcome = SystemParams::new(job.d, job.alpha, job.k, v.r1.clone(), v.r2.clone())
        .and_then(|p| simulate_front(&p, &cfg.grid, &cfg.run, &cfg.seeds[job.seed], None));
    let fr = match outcome {
        Ok(fr) => fr,
        Err(e) => {
            log::warn!("{}: {e}", rec.tag());
            rec.error = Some(e.to_string());
            return rec;
        }
    };
    rec.horizon = fr.horizon;
    rec.dt = fr.dt;
    rec.recenterings = fr.recenterings;
    rec.clamp_fraction = fr.state.clamp_fraction();
    rec.verdicts.insert("converged".into(), fr.converged);
    rec.verdicts
        .insert("clamp_budget".into(), rec.clamp_fraction < 1e-3);
    if let Some(last) = fr.crossings.last() {
        rec.final_snapshot = Some(snapshot_around(&fr.state, last.u1_level, 4));
    }
    match fr.estimate {
        Ok((a, b)) => {
            rec.seg_index = mean_overlap(&fr.crossings, a.window.0);
            rec.verdicts.insert("precise".into(), a.is_precise());
            rec.verdicts
                .insert("in_bracket".into(), bracket.0 < a.c && a.c < bracket.1);
            rec.c_measured = Some(a);
            rec.c_other_level = Some(b);
        }
        Err(e) => rec.error = Some(e),
    }
    rec.crossings = fr.crossings;
    log::info!(
        "{}: d={} alpha={} k={} c={} horizon={} {}",
        rec.tag(),
        rec.d,
        rec.alpha,
        rec.k,
        rec.c_measured
            .map_or("n/a".to_string(), |c| format!("{:.6}", c.c)),
        rec.horizon,
        rec.error.as_deref().unwrap_or("")
    );
    rec
}

/// Least-squares `c_k = a + b / k`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct LimitFit {
    pub c_inf: f64,
    pub c_inf_stderr: f64,
    pub slope: f64,
    pub residual_rms: f64,
}

pub fn fit_limit(ks: &[f64], cs: &[f64]) -> Option<LimitFit> {
    if ks.len() < 2 {
        return None;
    }
    let xs: Vec<f64> = ks.iter().map(|k| 1.0 / k).collect();
    let (slope, c_inf, _) = linear_fit(&xs, cs);
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sse: f64 = xs
        .iter()
        .zip(cs)
        .map(|(x, c)| (c - c_inf - slope * x).powi(2))
        .sum();
    let stderr = if xs.len() > 2 {
        (sse / (n - 2.0) * (1.0 / n + mx * mx / sxx)).sqrt()
    } else {
        0.0
    };
    Some(LimitFit {
        c_inf,
        c_inf_stderr: stderr,
        slope,
        residual_rms: (sse / n).sqrt(),
    })
}

/// Per `(d, alpha)` join of measurements and prediction.
#[derive(Clone, Debug, Serialize)]
pub struct PointSummary {
    pub point: usize,
    pub d: f64,
    pub alpha: f64,
    pub ratio: f64,
    pub prediction: SignReport,
    /// Distance of `alpha^2/d` to `R0` (0 inside).
    pub margin: f64,
    /// `(k, c, stderr)` for the first seed.
    pub speeds: Vec<(f64, f64, f64)>,
    pub limit: Option<LimitFit>,
    /// Sign of `c` at the largest `k` (0 when below the stationary floor).
    pub measured_sign: Option<i8>,
    /// Only set where the margin exceeds the configured one.
    pub agree: Option<bool>,
    pub segregation: Vec<(f64, f64)>,
    pub segregation_decreasing: Option<bool>,
    pub segregation_slope: Option<f64>,
    /// Every seed's speed at the largest `k` against the first seed, within 2 combined stderr.
    pub seeds_agree: Option<bool>,
}

fn margin_to(ratio: f64, r0: (f64, f64)) -> f64 {
    if ratio < r0.0 {
        r0.0 - ratio
    } else if ratio > r0.1 {
        ratio - r0.1
    } else {
        0.0
    }
}

fn measured_sign(c: f64) -> i8 {
    if c.abs() <= C_FLOOR {
        0
    } else if c > 0.0 {
        1
    } else {
        -1
    }
}

fn summarize_point(
    point: usize,
    d: f64,
    alpha: f64,
    pred: SignReport,
    records: &[&RunRecord],
    margin_req: f64,
) -> PointSummary {
    let first: Vec<&&RunRecord> = records.iter().filter(|r| r.seed == 0).collect();
    let speeds: Vec<(f64, f64, f64)> = first
        .iter()
        .filter_map(|r| r.c_measured.map(|c| (r.k, c.c, c.stderr)))
        .collect();
    let complete = speeds.len() == first.len();
    let limit = if complete {
        let ks: Vec<f64> = speeds.iter().map(|s| s.0).collect();
        let cs: Vec<f64> = speeds.iter().map(|s| s.1).collect();
        fit_limit(&ks, &cs)
    } else {
        None
    };
    let kmax = first.iter().map(|r| r.k).fold(f64::NEG_INFINITY, f64::max);
    let top = |seed: usize| {
        records
            .iter()
            .find(|r| r.seed == seed && r.k == kmax)
            .and_then(|r| r.c_measured)
    };
    let sign = top(0).map(|c| measured_sign(c.c));
    let margin = margin_to(pred.ratio, pred.r0_interval);
    let agree = if margin > margin_req {
        Some(sign.is_some() && sign == pred.predicted.sign())
    } else {
        None
    };
    let segregation: Vec<(f64, f64)> = first
        .iter()
        .filter_map(|r| r.seg_index.map(|s| (r.k, s)))
        .collect();
    let seg_complete = segregation.len() == first.len() && segregation.len() >= 2;
    let segregation_decreasing =
        seg_complete.then(|| segregation.windows(2).all(|w| w[1].1 < w[0].1));
    let segregation_slope = (seg_complete && segregation.iter().all(|s| s.1 > 0.0)).then(|| {
        let lx: Vec<f64> = segregation.iter().map(|s| s.0.ln()).collect();
        let ly: Vec<f64> = segregation.iter().map(|s| s.1.ln()).collect();
        linear_fit(&lx, &ly).0
    });
    let seeds: Vec<usize> = {
        let mut s: Vec<usize> = records.iter().map(|r| r.seed).collect();
        s.sort_unstable();
        s.dedup();
        s
    };
    let seeds_agree = (seeds.len() > 1).then(|| {
        let base = top(0);
        seeds[1..].iter().all(|&s| match (base, top(s)) {
            (Some(a), Some(b)) => {
                (a.c - b.c).abs() <= 2.0 * (a.stderr.powi(2) + b.stderr.powi(2)).sqrt()
            }
            _ => false,
        })
    });
    PointSummary {
        point,
        d,
        alpha,
        ratio: pred.ratio,
        prediction: pred,
        margin,
        speeds,
        limit,
        measured_sign: sign,
        agree,
        segregation,
        segregation_decreasing,
        segregation_slope,
        seeds_agree,
    }
}

/// Diagnostics of one resolution of a free-boundary study.
#[derive(Clone, Debug, Serialize)]
pub struct FreeBoundaryLevel {
    pub nodes_per_period: usize,
    pub speed: SpeedEstimate,
    pub dx: f64,
    pub monotonicity_violation: f64,
    pub periodicity_deviation: f64,
    pub flux_mismatch_max: f64,
    pub flux_mismatch_median: f64,
    pub fluxes_negative: bool,
    pub offset_nodes: usize,
    pub samples: usize,
    pub xi_prime: Option<XiPrimeReport>,
    /// `(shift, monotonicity violation)` of the normalized profile.
    pub profile_shift: Option<f64>,
    pub profile_monotonicity: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct FreeBoundaryStudy {
    pub d: f64,
    pub alpha: f64,
    pub k: f64,
    pub levels: Vec<FreeBoundaryLevel>,
    /// Trace at the finest resolution.
    pub trace: FreeBoundaryTrace,
}

impl FreeBoundaryStudy {
    pub fn verdicts(&self) -> Vec<Verdict> {
        let mono = self.levels.iter().all(|l| l.monotonicity_violation < l.dx);
        let per = self.levels.iter().all(|l| l.periodicity_deviation < 0.05);
        let flux = self
            .levels
            .iter()
            .all(|l| l.fluxes_negative && l.flux_mismatch_max < 0.05);
        let detail = |f: &dyn Fn(&FreeBoundaryLevel) -> String| {
            self.levels.iter().map(f).collect::<Vec<_>>().join("; ")
        };
        vec![
            Verdict::new(
                "free_boundary_monotone",
                mono,
                detail(&|l| {
                    format!(
                        "n={}: violation {:.3e} vs dx {:.3e}",
                        l.nodes_per_period, l.monotonicity_violation, l.dx
                    )
                }),
            ),
            Verdict::new(
                "free_boundary_periodic",
                per,
                detail(&|l| {
                    format!(
                        "n={}: deviation {:.3e}",
                        l.nodes_per_period, l.periodicity_deviation
                    )
                }),
            ),
            Verdict::new(
                "free_boundary_flux",
                flux,
                detail(&|l| {
                    format!(
                        "n={}: max mismatch {:.4}, negative {}",
                        l.nodes_per_period, l.flux_mismatch_max, l.fluxes_negative
                    )
                }),
            ),
        ]
    }
}

/// Simulates the configured moving front at each resolution and extracts `Xi(t)`.
pub fn free_boundary_study(
    spec: &FreeBoundarySpec,
    cfg: &ExperimentConfig,
    v: &Validated,
) -> Result<FreeBoundaryStudy> {
    let params = SystemParams::new(spec.d, spec.alpha, spec.k, v.r1.clone(), v.r2.clone())?;
    let runs: Vec<Result<(FreeBoundaryLevel, FreeBoundaryTrace)>> = spec
        .resolutions
        .par_iter()
        .map(|&n| {
            let grid = GridSpec {
                nodes_per_period: n,
                periods: cfg.grid.periods,
            };
            let run = RunSpec {
                horizon: spec.horizon,
                max_horizon: spec.horizon.max(cfg.run.max_horizon),
                ..cfg.run.clone()
            };
            let fr = simulate_front(
                &params,
                &grid,
                &run,
                &cfg.seeds[0],
                Some(spec.tail_fraction),
            )?;
            let (speed, _) = fr.estimate.map_err(Error::InsufficientData)?;
            let trace =
                extract_free_boundary(&fr.snapshots, &params, speed.c, &FluxStencil::default())?;
            let xi_prime = xi_prime_check(&trace, spec.d).ok();
            let profile =
                reconstruct_profile(&fr.snapshots, speed.c, cfg.period, params.a1(), params.a2())
                    .and_then(|p| normalize(&p, speed.c));
            let level = FreeBoundaryLevel {
                nodes_per_period: n,
                speed,
                dx: trace.dx,
                monotonicity_violation: trace.monotonicity_violation(),
                periodicity_deviation: trace.periodicity_deviation(cfg.period)?,
                flux_mismatch_max: trace.flux_mismatch(),
                flux_mismatch_median: trace.flux_mismatch_median(),
                fluxes_negative: trace.fluxes_negative(),
                offset_nodes: trace.offset_nodes,
                samples: trace.times.len(),
                xi_prime,
                profile_shift: profile.as_ref().ok().map(|p| p.1),
                profile_monotonicity: profile.as_ref().ok().map(|p| p.0.monotonicity_violation()),
            };
            Ok((level, trace))
        })
        .collect();
    let mut levels = Vec::new();
    let mut trace = None;
    for r in runs {
        let (l, t) = r?;
        levels.push(l);
        trace = Some(t);
    }
    Ok(FreeBoundaryStudy {
        d: spec.d,
        alpha: spec.alpha,
        k: spec.k,
        levels,
        trace: trace.expect("at least one resolution"),
    })
}

/// Everything a sweep produces.
#[derive(Clone, Debug, Serialize)]
pub struct ExperimentReport {
    pub config_hash: String,
    pub name: String,
    pub overrides: Overrides,
    pub records: Vec<RunRecord>,
    pub points: Vec<PointSummary>,
    pub analyses: Vec<PairAnalysis>,
    pub free_boundary: Option<FreeBoundaryStudy>,
    pub verdicts: Vec<Verdict>,
}

impl ExperimentReport {
    pub fn passed(&self) -> bool {
        self.verdicts.iter().all(|v| v.passed)
    }

    pub fn verdict(&self, name: &str) -> Option<&Verdict> {
        self.verdicts.iter().find(|v| v.name == name)
    }
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))
}

/// Threshold data for each `d` and sign reports for each `(d, alpha)`, in config order.
pub fn predictions(v: &Validated) -> Result<(Vec<PairAnalysis>, Vec<SignReport>)> {
    let analyses: Vec<PairAnalysis> =
        v.ds.par_iter()
            .map(|&d| PairAnalysis::new(d, &v.r1, &v.r2))
            .collect::<Result<_>>()?;
    let mut reports = Vec::new();
    for a in &analyses {
        for &alpha in &v.alphas {
            reports.push(predict_sign_from(a, alpha, &v.r1, &v.r2)?);
        }
    }
    Ok((analyses, reports))
}

fn prediction_verdicts(analyses: &[PairAnalysis], reports: &[SignReport]) -> Vec<Verdict> {
    let nested = analyses.iter().all(|a| {
        a.r_lo <= a.r0.0 + 1e-7 * a.r_hi.max(1.0) && a.r0.1 <= a.r_hi + 1e-7 * a.r_hi.max(1.0)
    });
    let spread = analyses.iter().fold(
        (
            f64::INFINITY,
            f64::NEG_INFINITY,
            f64::INFINITY,
            f64::NEG_INFINITY,
        ),
        |s, a| {
            (
                s.0.min(a.r_lo),
                s.1.max(a.r_lo),
                s.2.min(a.r_hi),
                s.3.max(a.r_hi),
            )
        },
    );
    let d_indep = spread.1 - spread.0 <= 1e-6 && spread.3 - spread.2 <= 1e-6;
    let mut v = vec![
        Verdict::new(
            "prediction_nesting",
            nested,
            analyses
                .iter()
                .map(|a| {
                    format!(
                        "d={}: {:.6} <= [{:.6}, {:.6}] <= {:.6}",
                        a.d, a.r_lo, a.r0.0, a.r0.1, a.r_hi
                    )
                })
                .collect::<Vec<_>>()
                .join("; "),
        ),
        Verdict::new(
            "bounds_independent_of_d",
            d_indep,
            format!(
                "r_lo spread {:.3e}, r_hi spread {:.3e}",
                spread.1 - spread.0,
                spread.3 - spread.2
            ),
        ),
    ];
    if reports.iter().all(|r| r.logistic_sign.is_some()) {
        let ok = reports
            .iter()
            .all(|r| r.logistic_sign == Some(r.integral_sign));
        v.push(Verdict::new(
            "logistic_closed_form",
            ok,
            format!(
                "{} points: closed-form sign vs sign integral",
                reports.len()
            ),
        ));
    }
    v
}

/// Runs every `(d, alpha, k, seed)` simulation, the predictions and the join.
pub fn run_sweep(loaded: &LoadedConfig) -> Result<ExperimentReport> {
    let cfg = &loaded.config;
    let v = cfg.validate()?;
    let kv = cfg.check_k_schedule(&v);
    if !kv.passed {
        return Err(Error::Config(kv.detail));
    }
    let pool = pool(cfg.run.workers)?;
    pool.install(|| {
        let (analyses, reports) = predictions(&v)?;
        let brackets: Vec<(f64, f64)> =
            v.ds.par_iter()
                .map(|&d| speed_bracket(d, &v.r1, &v.r2))
                .collect::<Result<_>>()?;
        let mut jobs = Vec::new();
        let mut point = 0;
        for &d in &v.ds {
            for &alpha in &v.alphas {
                for &k in &cfg.k_schedule {
                    for seed in 0..cfg.seeds.len() {
                        jobs.push(Job {
                            point,
                            d,
                            alpha,
                            k,
                            seed,
                        });
                    }
                }
                point += 1;
            }
        }
        let na = v.alphas.len();
        let records: Vec<RunRecord> = jobs
            .par_iter()
            .map(|j| run_job(j, cfg, &v, brackets[j.point / na], &loaded.hash))
            .collect();
        let points: Vec<PointSummary> = reports
            .iter()
            .enumerate()
            .map(|(p, rep)| {
                let recs: Vec<&RunRecord> = records.iter().filter(|r| r.point == p).collect();
                summarize_point(p, rep.d, rep.alpha, rep.clone(), &recs, cfg.sign_margin)
            })
            .collect();
        let free_boundary = cfg
            .free_boundary
            .as_ref()
            .map(|fb| free_boundary_study(fb, cfg, &v))
            .transpose()?;
        let mut verdicts = vec![kv.clone()];
        verdicts.extend(hypothesis_verdicts(&v)?);
        if cfg.d_exis_check {
            verdicts.push(d_exis_verdict(&v));
        }
        verdicts.extend(prediction_verdicts(&analyses, &reports));
        verdicts.extend(sweep_verdicts(&records, &points));
        if let Some(fb) = &free_boundary {
            verdicts.extend(fb.verdicts());
        }
        Ok(ExperimentReport {
            config_hash: loaded.hash.clone(),
            name: cfg.name.clone(),
            overrides: loaded.overrides.clone(),
            records,
            points,
            analyses,
            free_boundary,
            verdicts,
        })
    })
}

fn hypothesis_verdicts(v: &Validated) -> Result<Vec<Verdict>> {
    let mut out = Vec::new();
    for (name, r) in [
        ("hypotheses_species1", &v.r1),
        ("hypotheses_species2", &v.r2),
    ] {
        let rep = validate_hypotheses(r, Sampling::default())?;
        let failed: Vec<&str> = rep
            .checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| c.name)
            .collect();
        out.push(Verdict::new(
            name,
            rep.passed(),
            if failed.is_empty() {
                "all hold".into()
            } else {
                format!("failed: {}", failed.join(", "))
            },
        ));
    }
    Ok(out)
}

fn d_exis_verdict(v: &Validated) -> Verdict {
    let de = d_exis(&v.r1, &v.r2);
    let ok = v.ds.iter().all(|d| *d > de);
    let freq: Vec<String> =
        v.ds.iter()
            .map(|d| format!("d={d}: H_freq {}", h_freq(*d, &v.r1, &v.r2)))
            .collect();
    Verdict::new(
        "d_above_d_exis",
        ok,
        format!("D_exis = {de:.6}; {}", freq.join(", ")),
    )
}

fn sweep_verdicts(records: &[RunRecord], points: &[PointSummary]) -> Vec<Verdict> {
    let failed: Vec<String> = records
        .iter()
        .filter(|r| r.error.is_some())
        .map(|r| format!("{}: {}", r.tag(), r.error.as_deref().unwrap_or("")))
        .collect();
    let count = |key: &str| {
        records
            .iter()
            .filter(|r| r.verdicts.get(key) == Some(&false))
            .map(|r| r.tag())
            .collect::<Vec<_>>()
    };
    let list = |v: Vec<String>| {
        if v.is_empty() {
            "none".to_string()
        } else {
            v.join(", ")
        }
    };
    let mut out = vec![
        Verdict::new(
            "runs_completed",
            failed.is_empty(),
            format!("{} runs, failures: {}", records.len(), list(failed)),
        ),
        {
            let bad = count("precise");
            Verdict::new(
                "speed_precision",
                bad.is_empty(),
                format!("imprecise: {}", list(bad)),
            )
        },
        {
            let bad = count("converged");
            Verdict::new(
                "speed_converged",
                bad.is_empty(),
                format!("not converged within max_horizon: {}", list(bad)),
            )
        },
        {
            let bad = count("clamp_budget");
            Verdict::new(
                "clamp_budget",
                bad.is_empty(),
                format!("over budget: {}", list(bad)),
            )
        },
        {
            let bad = count("in_bracket");
            let worst = records
                .iter()
                .filter_map(|r| {
                    r.c_measured
                        .map(|c| (c.c - r.bracket.0).min(r.bracket.1 - c.c))
                })
                .fold(f64::INFINITY, f64::min);
            Verdict::new(
                "speed_bracket",
                bad.is_empty() && records.iter().all(|r| r.c_measured.is_some()),
                format!(
                    "outside: {}; smallest distance to a bracket end {worst:.4}",
                    list(bad)
                ),
            )
        },
    ];
    let checked: Vec<&PointSummary> = points.iter().filter(|p| p.agree.is_some()).collect();
    let disagree: Vec<String> = checked
        .iter()
        .filter(|p| p.agree == Some(false))
        .map(|p| format!("(d={}, alpha={})", p.d, p.alpha))
        .collect();
    out.push(Verdict::new(
        "sign_agreement",
        disagree.is_empty(),
        format!(
            "{} points beyond the margin, disagreements: {}",
            checked.len(),
            list(disagree)
        ),
    ));
    if points.iter().all(|p| p.prediction.logistic_sign.is_some()) {
        let bad: Vec<String> = points
            .iter()
            .filter(|p| {
                p.prediction.logistic_sign != Some(p.prediction.integral_sign)
                    || (p.agree.is_some() && p.prediction.logistic_sign != p.measured_sign)
            })
            .map(|p| format!("(d={}, alpha={})", p.d, p.alpha))
            .collect();
        out.push(Verdict::new(
            "logistic_corollary",
            bad.is_empty(),
            format!(
                "closed-form sign vs sign integral and measured sign: mismatches {}",
                list(bad)
            ),
        ));
    }
    let multi_k = points.iter().any(|p| p.speeds.len() > 1);
    if multi_k {
        let bad: Vec<String> = points
            .iter()
            .filter(|p| p.segregation_decreasing != Some(true))
            .map(|p| format!("(d={}, alpha={})", p.d, p.alpha))
            .collect();
        out.push(Verdict::new(
            "segregation_decreasing",
            bad.is_empty(),
            format!("not strictly decreasing: {}", list(bad)),
        ));
        let slopes: Vec<f64> = points.iter().filter_map(|p| p.segregation_slope).collect();
        let ok = slopes.len() == points.len() && slopes.iter().all(|s| (-1.4..=-0.6).contains(s));
        let (lo, hi) = slopes
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |a, s| {
                (a.0.min(*s), a.1.max(*s))
            });
        out.push(Verdict::new(
            "segregation_slope",
            ok,
            format!("log-log slopes in [{lo:.3}, {hi:.3}]"),
        ));
    }
    if points.iter().any(|p| p.seeds_agree.is_some()) {
        let bad: Vec<String> = points
            .iter()
            .filter(|p| p.seeds_agree == Some(false))
            .map(|p| format!("(d={}, alpha={})", p.d, p.alpha))
            .collect();
        out.push(Verdict::new(
            "speed_uniqueness",
            bad.is_empty(),
            format!("seed disagreements: {}", list(bad)),
        ));
    }
    out
}

/// Theta-only path: threshold profiles and sign predictions.
#[derive(Clone, Debug, Serialize)]
pub struct PredictionReport {
    pub config_hash: String,
    pub analyses: Vec<PairAnalysis>,
    pub reports: Vec<SignReport>,
    pub verdicts: Vec<Verdict>,
}

pub fn run_predictions(loaded: &LoadedConfig) -> Result<PredictionReport> {
    let v = loaded.config.validate()?;
    pool(loaded.config.run.workers)?.install(|| {
        let (analyses, reports) = predictions(&v)?;
        let verdicts = prediction_verdicts(&analyses, &reports);
        Ok(PredictionReport {
            config_hash: loaded.hash.clone(),
            analyses,
            reports,
            verdicts,
        })
    })
}

/// Hypothesis and existence audit.
#[derive(Clone, Debug, Serialize)]
pub struct CheckReport {
    pub config_hash: String,
    pub hypotheses: Vec<ValidationReport>,
    pub k_bistable: Vec<(f64, f64)>,
    pub d_exis: f64,
    pub h_freq: Vec<(f64, bool)>,
    pub verdicts: Vec<Verdict>,
}

pub fn run_check(loaded: &LoadedConfig) -> Result<CheckReport> {
    let cfg = &loaded.config;
    let v = cfg.validate()?;
    let mut verdicts = hypothesis_verdicts(&v)?;
    verdicts.push(cfg.check_k_schedule(&v));
    verdicts.push(d_exis_verdict(&v));
    Ok(CheckReport {
        config_hash: loaded.hash.clone(),
        hypotheses: vec![
            validate_hypotheses(&v.r1, Sampling::default())?,
            validate_hypotheses(&v.r2, Sampling::default())?,
        ],
        k_bistable: v
            .alphas
            .iter()
            .map(|a| (*a, k_bistable(*a, &v.r1, &v.r2)))
            .collect(),
        d_exis: d_exis(&v.r1, &v.r2),
        h_freq: v
            .ds
            .iter()
            .map(|d| (*d, h_freq(*d, &v.r1, &v.r2)))
            .collect(),
        verdicts,
    })
}

fn write(out: &Path, name: &str, content: &str, written: &mut Vec<PathBuf>) -> Result<()> {
    let p = out.join(name);
    if let Some(parent) = p.parent() {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(&p, content)?;
    written.push(p);
    Ok(())
}

fn opt(v: Option<f64>) -> String {
    v.map_or(String::new(), |x| x.to_string())
}

fn write_config(out: &Path, source: &str, hash: &str, written: &mut Vec<PathBuf>) -> Result<()> {
    write(out, "config.toml", source, written)?;
    write(
        out,
        "config.sha256",
        &format!("{hash}  config.toml\n"),
        written,
    )
}

/// Column layout of `prediction.csv`.
pub fn prediction_csv(reports: &[SignReport]) -> String {
    let mut s = String::from("d,alpha,ratio,r_lo,r0_min,r0_max,r_hi,integral,predicted\n");
    for r in reports {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{}",
            r.d,
            r.alpha,
            r.ratio,
            r.r_lo,
            r.r0_interval.0,
            r.r0_interval.1,
            r.r_hi,
            r.integral,
            r.predicted.label()
        );
    }
    s
}

fn verdicts_csv(hash: &str, verdicts: &[Verdict]) -> String {
    let mut s = String::from("config_hash,criterion,passed,detail\n");
    for v in verdicts {
        let _ = writeln!(
            s,
            "{hash},{},{},\"{}\"",
            v.name,
            v.passed,
            v.detail.replace('"', "'")
        );
    }
    s
}

/// Writes the sweep tables, per-run artifacts, plots and the JSON report.
pub fn emit_report(
    report: &mut ExperimentReport,
    source: &str,
    out: &Path,
) -> Result<Vec<PathBuf>> {
    if report.records.is_empty() {
        return Err(Error::InsufficientData("no run records".into()));
    }
    std::fs::create_dir_all(out)?;
    let mut written = Vec::new();
    let hash = report.config_hash.clone();
    write_config(out, source, &hash, &mut written)?;

    for rec in report.records.iter_mut() {
        let dir = format!("runs/{}", rec.tag());
        let mut cross = String::from("t,u1_level,u2_level,overlap\n");
        for c in &rec.crossings {
            let _ = writeln!(cross, "{},{},{},{}", c.t, c.u1_level, c.u2_level, c.overlap);
        }
        let name = format!("{dir}/crossings.csv");
        write(out, &name, &cross, &mut written)?;
        rec.artifacts.push(name);
        if let Some(snap) = &rec.final_snapshot {
            let mut buf = Vec::new();
            write_snapshot_csv(&mut buf, snap, rec.d, rec.alpha)?;
            let name = format!("{dir}/{}", snapshot_file_name(snap.t));
            write(out, &name, &String::from_utf8_lossy(&buf), &mut written)?;
            rec.artifacts.push(name);
        }
    }

    let mut s = String::from(
        "config_hash,point,d,alpha,k,seed,c,stderr,c_other_level,stderr_other_level,periods,horizon,dt,seg_index,clamp_fraction,bracket_lo,bracket_hi,status,error\n",
    );
    for r in &report.records {
        let _ = writeln!(
            s,
            "{hash},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},\"{}\"",
            r.point,
            r.d,
            r.alpha,
            r.k,
            r.seed,
            opt(r.c_measured.map(|c| c.c)),
            opt(r.c_measured.map(|c| c.stderr)),
            opt(r.c_other_level.map(|c| c.c)),
            opt(r.c_other_level.map(|c| c.stderr)),
            r.c_measured
                .map_or(String::new(), |c| c.periods.to_string()),
            r.horizon,
            r.dt,
            opt(r.seg_index),
            r.clamp_fraction,
            r.bracket.0,
            r.bracket.1,
            if r.ok() { "ok" } else { "flagged" },
            r.error.as_deref().unwrap_or("").replace('"', "'")
        );
    }
    write(out, "summary.csv", &s, &mut written)?;

    let reports: Vec<SignReport> = report.points.iter().map(|p| p.prediction.clone()).collect();
    write(
        out,
        "prediction.csv",
        &prediction_csv(&reports),
        &mut written,
    )?;

    let mut s = String::from(
        "config_hash,d,alpha,ratio,predicted,logistic_sign,margin,c_kmax,stderr_kmax,measured_sign,c_inf,c_inf_stderr,c_inf_residual,agree\n",
    );
    for p in &report.points {
        let top = p.speeds.last();
        let _ = writeln!(
            s,
            "{hash},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            p.d,
            p.alpha,
            p.ratio,
            p.prediction.predicted.label(),
            p.prediction
                .logistic_sign
                .map_or(String::new(), |v| v.to_string()),
            p.margin,
            opt(top.map(|t| t.1)),
            opt(top.map(|t| t.2)),
            p.measured_sign.map_or(String::new(), |v| v.to_string()),
            opt(p.limit.map(|l| l.c_inf)),
            opt(p.limit.map(|l| l.c_inf_stderr)),
            opt(p.limit.map(|l| l.residual_rms)),
            p.agree.map_or("unchecked".to_string(), |a| a.to_string())
        );
    }
    write(out, "predictions.csv", &s, &mut written)?;
    write(
        out,
        "verdicts.csv",
        &verdicts_csv(&hash, &report.verdicts),
        &mut written,
    )?;

    let mut plot = Plot::new("measured speed against 1/k", "1/k", "c_k");
    for (i, p) in report.points.iter().enumerate() {
        let pts = p.speeds.iter().map(|s| (1.0 / s.0, s.1)).collect();
        plot.push(
            format!("d={} alpha={}", p.d, p.alpha),
            PALETTE[i % PALETTE.len()],
            Style::Line,
            pts,
        );
    }
    write(out, "speed_vs_inv_k.svg", &plot.to_svg(), &mut written)?;
    write(
        out,
        "phase_diagram.svg",
        &phase_diagram(report).to_svg(),
        &mut written,
    )?;

    if let Some(fb) = &report.free_boundary {
        let tr = &fb.trace;
        let mut s = String::from("t,xi,flux_left,flux_right,curv_left,curv_right\n");
        for i in 0..tr.times.len() {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{}",
                tr.times[i],
                tr.xi_of_t[i],
                tr.flux_left[i],
                tr.flux_right[i],
                tr.curv_left[i],
                tr.curv_right[i]
            );
        }
        write(out, "xi_trace.csv", &s, &mut written)?;
        let mut plot = Plot::new("free boundary", "t", "Xi(t)");
        plot.push(
            format!("d={} alpha={} k={}", fb.d, fb.alpha, fb.k),
            PALETTE[0],
            Style::Line,
            tr.times
                .iter()
                .copied()
                .zip(tr.xi_of_t.iter().copied())
                .collect(),
        );
        write(out, "xi_trace.svg", &plot.to_svg(), &mut written)?;
    }

    let json = serde_json::to_string_pretty(&*report).map_err(|e| Error::Config(e.to_string()))?;
    write(out, "front_report.json", &json, &mut written)?;
    Ok(written)
}

fn phase_diagram(report: &ExperimentReport) -> Plot {
    let mut plot = Plot::new(
        "sign of the front speed: dots measured, squares predicted",
        "d",
        "alpha",
    );
    let color = |s: Option<i8>| match s {
        Some(1) => PALETTE[1],
        Some(-1) => PALETTE[0],
        _ => "#7f7f7f",
    };
    for (label, sign) in [
        ("positive", Some(1)),
        ("negative", Some(-1)),
        ("zero or unresolved", None),
    ] {
        let pick = |s: Option<i8>| {
            if sign.is_some() {
                s == sign
            } else {
                !matches!(s, Some(1) | Some(-1))
            }
        };
        let measured: Vec<(f64, f64)> = report
            .points
            .iter()
            .filter(|p| pick(p.measured_sign))
            .map(|p| (p.d, p.alpha))
            .collect();
        let predicted: Vec<(f64, f64)> = report
            .points
            .iter()
            .filter(|p| pick(p.prediction.predicted.sign()))
            .map(|p| (p.d, p.alpha))
            .collect();
        plot.push(
            format!("measured {label}"),
            color(sign),
            Style::Dots,
            measured,
        );
        plot.push(
            format!("predicted {label}"),
            color(sign),
            Style::Squares,
            predicted,
        );
    }
    if let (Some(a), Some(dmax)) = (
        report.analyses.first(),
        report.points.iter().map(|p| p.d).reduce(f64::max),
    ) {
        let dmin = report
            .points
            .iter()
            .map(|p| p.d)
            .fold(f64::INFINITY, f64::min);
        let curve = |r: f64| {
            (0..=64)
                .map(|i| dmin + (dmax - dmin) * i as f64 / 64.0)
                .map(|d| (d, (d * r).sqrt()))
                .collect()
        };
        plot.push("alpha^2 = d r_lo", PALETTE[2], Style::Line, curve(a.r_lo));
        plot.push("alpha^2 = d r_hi", PALETTE[3], Style::Line, curve(a.r_hi));
    }
    plot
}

pub fn emit_predictions(
    report: &PredictionReport,
    source: &str,
    out: &Path,
) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out)?;
    let mut written = Vec::new();
    write_config(out, source, &report.config_hash, &mut written)?;
    write(
        out,
        "prediction.csv",
        &prediction_csv(&report.reports),
        &mut written,
    )?;
    let mut s = String::from("d,x,a_d\n");
    for a in &report.analyses {
        for (x, v) in a.profile.x_samples.iter().zip(&a.profile.a_values) {
            let _ = writeln!(s, "{},{},{}", a.d, x, v);
        }
    }
    write(out, "a_profile.csv", &s, &mut written)?;
    write(
        out,
        "verdicts.csv",
        &verdicts_csv(&report.config_hash, &report.verdicts),
        &mut written,
    )?;
    let json = serde_json::to_string_pretty(report).map_err(|e| Error::Config(e.to_string()))?;
    write(out, "prediction_report.json", &json, &mut written)?;
    Ok(written)
}

pub fn emit_check(report: &CheckReport, source: &str, out: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out)?;
    let mut written = Vec::new();
    write_config(out, source, &report.config_hash, &mut written)?;
    write(
        out,
        "verdicts.csv",
        &verdicts_csv(&report.config_hash, &report.verdicts),
        &mut written,
    )?;
    let json = serde_json::to_string_pretty(report).map_err(|e| Error::Config(e.to_string()))?;
    write(out, "check_report.json", &json, &mut written)?;
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
name = "t"
d = 1.0
alpha = [1.0, 2.0]
k_schedule = [50.0, 100.0]

[species1]
a = 1.0
mean = 1.0

[species2]
a = 1.0
mean = 1.0
fourier_sine = [0.5]
"#;

    #[test]
    fn parses_and_hashes() {
        let c = LoadedConfig::from_toml_str(MINIMAL).unwrap();
        assert_eq!(c.hash.len(), 64);
        assert_eq!(c.hash, content_hash(MINIMAL.as_bytes()));
        assert_eq!(c.config.grid, GridSpec::default());
        assert_eq!(c.config.alpha.values(), vec![1.0, 2.0]);
        let v = c.config.validate().unwrap();
        assert!((v.r2.m_min() - 0.5).abs() < 1e-9);
        assert!(c.config.check_k_schedule(&v).passed);
    }

    #[test]
    fn range_values() {
        let r = ValueSpec::Range {
            from: 0.5,
            to: 2.0,
            count: 4,
        };
        assert_eq!(r.values(), vec![0.5, 1.0, 1.5, 2.0]);
    }

    #[test]
    fn rejects_bad_configs() {
        let bad = MINIMAL.replace("k_schedule = [50.0, 100.0]", "k_schedule = [100.0, 50.0]");
        let c = LoadedConfig::from_toml_str(&bad).unwrap();
        assert!(matches!(c.config.validate(), Err(Error::Config(_))));
        let low = MINIMAL.replace("k_schedule = [50.0, 100.0]", "k_schedule = [0.5, 100.0]");
        let c = LoadedConfig::from_toml_str(&low).unwrap();
        let v = c.config.validate().unwrap();
        assert!(!c.config.check_k_schedule(&v).passed);
        assert!(LoadedConfig::from_toml_str("name = 3").is_err());
        assert!(LoadedConfig::from_toml_str(&format!("{MINIMAL}\nbogus = 1\n")).is_err());
    }

    #[test]
    fn existence_thresholds() {
        let r = PeriodicReaction::homogeneous(1.0, 1.0, 1.0).unwrap();
        // L sqrt(M1) = 1 < pi
        assert_eq!(d_exis(&r, &r), 0.0);
        assert!(h_freq(1.0, &r, &r));
        let long = PeriodicReaction::homogeneous(1.0, 1.0, 10.0).unwrap();
        let expect = (10.0 / std::f64::consts::PI - 1.0).powi(2);
        assert!((d_exis(&long, &long) - expect).abs() < 1e-12);
        assert!(!h_freq(1.0, &long, &long));
        assert!((k_bistable(2.0, &r, &r) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn limit_fit_recovers_line() {
        let ks = [50.0, 100.0, 200.0, 400.0];
        let cs: Vec<f64> = ks.iter().map(|k| 0.3 + 2.0 / k).collect();
        let f = fit_limit(&ks, &cs).unwrap();
        assert!(
            (f.c_inf - 0.3).abs() < 1e-12
                && (f.slope - 2.0).abs() < 1e-10
                && f.residual_rms < 1e-12
        );
    }
}
