//! IMEX time integration of the competition-diffusion system on a window that
//! follows the front in whole periods.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics::trapezoid;
use crate::reaction::PeriodicReaction;

/// Box tolerance of the comparison principle.
pub const BOX_EPS: f64 = 1e-8;

/// Uniform grid whose nodes sit on multiples of `L / nodes_per_period`, so the
/// periodic coefficients are exactly aligned with the nodes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Grid1D {
    pub period: f64,
    pub nodes_per_period: usize,
    pub periods: usize,
    /// Index of the period the left end point starts (left end = `origin * L`).
    pub origin: i64,
}

impl Grid1D {
    pub fn new(period: f64, nodes_per_period: usize, periods: usize, origin: i64) -> Result<Self> {
        if !(period > 0.0) {
            return Err(Error::Domain("period must be positive".into()));
        }
        if nodes_per_period < 64 {
            return Err(Error::Domain(format!(
                "nodes_per_period must be at least 64, got {nodes_per_period}"
            )));
        }
        if periods < 12 {
            return Err(Error::Domain(format!(
                "window must span at least 12 periods, got {periods}"
            )));
        }
        Ok(Grid1D {
            period,
            nodes_per_period,
            periods,
            origin,
        })
    }

    pub fn dx(&self) -> f64 {
        self.period / self.nodes_per_period as f64
    }

    pub fn n(&self) -> usize {
        self.periods * self.nodes_per_period + 1
    }

    pub fn x0(&self) -> f64 {
        self.origin as f64 * self.period
    }

    pub fn length(&self) -> f64 {
        self.periods as f64 * self.period
    }

    pub fn x(&self, i: usize) -> f64 {
        (self.origin * self.nodes_per_period as i64 + i as i64) as f64 * self.dx()
    }

    /// Node index within its period.
    pub fn phase(&self, i: usize) -> usize {
        i % self.nodes_per_period
    }
}

#[derive(Clone, Debug)]
pub struct SystemParams {
    pub d: f64,
    pub alpha: f64,
    pub k: f64,
    pub r1: PeriodicReaction,
    pub r2: PeriodicReaction,
}

impl SystemParams {
    pub fn new(
        d: f64,
        alpha: f64,
        k: f64,
        r1: PeriodicReaction,
        r2: PeriodicReaction,
    ) -> Result<Self> {
        if !(d > 0.0) || !(alpha > 0.0) || !(k >= 0.0) {
            return Err(Error::Domain(format!(
                "need d > 0, alpha > 0, k >= 0; got ({d}, {alpha}, {k})"
            )));
        }
        if (r1.period() - r2.period()).abs() > 1e-12 * r1.period() {
            return Err(Error::Domain("both reactions must share the period".into()));
        }
        Ok(SystemParams {
            d,
            alpha,
            k,
            r1,
            r2,
        })
    }

    pub fn a1(&self) -> f64 {
        self.r1.zero_level()
    }

    pub fn a2(&self) -> f64 {
        self.r2.zero_level()
    }

    /// `0.5 / (k max(alpha a1, a2) + max(M1, M2))`.
    pub fn default_dt(&self) -> f64 {
        0.5 / (self.k * (self.alpha * self.a1()).max(self.a2())
            + self.r1.m_max().max(self.r2.m_max()))
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SystemState {
    pub t: f64,
    pub grid: Grid1D,
    pub u1: Vec<f64>,
    pub u2: Vec<f64>,
    /// Node updates that had to be pulled back into the comparison box.
    pub clamp_events: u64,
    pub node_steps: u64,
}

impl SystemState {
    pub fn zeros(grid: Grid1D) -> Self {
        SystemState {
            t: 0.0,
            grid,
            u1: vec![0.0; grid.n()],
            u2: vec![0.0; grid.n()],
            clamp_events: 0,
            node_steps: 0,
        }
    }

    pub fn clamp_fraction(&self) -> f64 {
        if self.node_steps == 0 {
            0.0
        } else {
            self.clamp_events as f64 / self.node_steps as f64
        }
    }

    pub fn check_box(&self, a1: f64, a2: f64) -> Result<()> {
        for (u, a) in [(&self.u1, a1), (&self.u2, a2)] {
            for v in u.iter() {
                if !v.is_finite() {
                    return Err(Error::Blowup { t: self.t });
                }
                if *v < -BOX_EPS || *v > a + BOX_EPS {
                    return Err(Error::Consistency(format!(
                        "{v} left the box [0, {a}] at t = {}",
                        self.t
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn combined(&self, d: f64, alpha: f64) -> CombinedFields {
        CombinedFields::new(&self.u1, &self.u2, d, alpha)
    }
}

/// `v_d = alpha u1 - d u2` and `v_1 = alpha u1 - u2`.
#[derive(Clone, Debug)]
pub struct CombinedFields {
    pub v_d: Vec<f64>,
    pub v_1: Vec<f64>,
}

impl CombinedFields {
    pub fn new(u1: &[f64], u2: &[f64], d: f64, alpha: f64) -> Self {
        let v_d = u1.iter().zip(u2).map(|(a, b)| alpha * a - d * b).collect();
        let v_1 = u1.iter().zip(u2).map(|(a, b)| alpha * a - b).collect();
        CombinedFields { v_d, v_1 }
    }
}

fn sigmoid(y: f64) -> f64 {
    0.5 * (1.0 + (0.5 * y).tanh())
}

/// Front-like data: species 1 on the left of `interface_x`, species 2 on the right.
pub fn initial_front(
    grid: Grid1D,
    a1: f64,
    a2: f64,
    interface_x: f64,
    width: f64,
) -> Result<SystemState> {
    if !(width > 0.0) {
        return Err(Error::Domain(format!(
            "interface width must be positive, got {width}"
        )));
    }
    let (left, right) = (grid.x(0), grid.x(grid.n() - 1));
    if !(interface_x > left && interface_x < right) {
        return Err(Error::Domain(format!(
            "interface {interface_x} outside ({left}, {right})"
        )));
    }
    let mut s = SystemState::zeros(grid);
    for i in 0..grid.n() {
        let y = (interface_x - grid.x(i)) / width;
        s.u1[i] = a1 * sigmoid(y);
        s.u2[i] = a2 * sigmoid(-y);
    }
    Ok(s)
}

/// Per-node growth rates on the phases of one period.
enum NodeRate {
    Logistic { mu: Vec<f64>, a: f64 },
    General { r: PeriodicReaction, xs: Vec<f64> },
}

impl NodeRate {
    fn new(r: &PeriodicReaction, grid: &Grid1D) -> Self {
        let xs: Vec<f64> = (0..grid.nodes_per_period)
            .map(|j| j as f64 * grid.dx())
            .collect();
        match r.logistic_rate() {
            Some(mu) => NodeRate::Logistic {
                mu: xs.iter().map(|x| mu.eval(*x)).collect(),
                a: r.zero_level(),
            },
            None => NodeRate::General { r: r.clone(), xs },
        }
    }

    #[inline]
    fn eval(&self, u: f64, phase: usize) -> f64 {
        match self {
            NodeRate::Logistic { mu, a } => mu[phase] * (a - u),
            NodeRate::General { r, xs } => r.eval(u, xs[phase]),
        }
    }
}

/// Pre-factored Thomas solve of `(I - dt D d_xx)` with homogeneous Neumann ends.
struct ImplicitDiffusion {
    /// Sub-diagonal, scaled upper diagonal and inverse pivots of the LU factors.
    lower: Vec<f64>,
    upper_scaled: Vec<f64>,
    inv_pivot: Vec<f64>,
}

impl ImplicitDiffusion {
    fn new(n: usize, coeff: f64, dt: f64, dx: f64) -> Result<Self> {
        let r = coeff * dt / (dx * dx);
        let mut lower = vec![-r; n];
        let diag = vec![1.0 + 2.0 * r; n];
        let mut upper = vec![-r; n];
        // Ghost nodes u_{-1} = u_1 and u_n = u_{n-2}.
        upper[0] = -2.0 * r;
        lower[n - 1] = -2.0 * r;
        lower[0] = 0.0;
        upper[n - 1] = 0.0;
        let mut upper_scaled = vec![0.0; n];
        let mut inv_pivot = vec![0.0; n];
        let mut beta = diag[0];
        for i in 0..n {
            if i > 0 {
                upper_scaled[i] = upper[i - 1] / beta;
                beta = diag[i] - lower[i] * upper_scaled[i];
            }
            if !(beta.abs() > 0.0) || !beta.is_finite() {
                return Err(Error::NumericalFailure {
                    what: format!("diffusion pivot vanished at row {i}"),
                    residual: beta.abs(),
                });
            }
            inv_pivot[i] = 1.0 / beta;
        }
        Ok(ImplicitDiffusion {
            lower,
            upper_scaled,
            inv_pivot,
        })
    }

    /// Solves with two factorizations at once; interleaving the two
    /// recurrences lets their latency chains overlap.
    fn solve_pair(a: &Self, x: &mut [f64], b: &Self, y: &mut [f64]) {
        let n = x.len();
        x[0] *= a.inv_pivot[0];
        y[0] *= b.inv_pivot[0];
        for i in 1..n {
            x[i] = (x[i] - a.lower[i] * x[i - 1]) * a.inv_pivot[i];
            y[i] = (y[i] - b.lower[i] * y[i - 1]) * b.inv_pivot[i];
        }
        for i in (0..n - 1).rev() {
            x[i] -= a.upper_scaled[i + 1] * x[i + 1];
            y[i] -= b.upper_scaled[i + 1] * y[i + 1];
        }
    }
}

/// One-step IMEX integrator for fixed parameters, grid resolution and `dt`.
pub struct Stepper {
    params: SystemParams,
    dt: f64,
    rate1: NodeRate,
    rate2: NodeRate,
    diff1: ImplicitDiffusion,
    diff2: ImplicitDiffusion,
    npp: usize,
}

impl Stepper {
    pub fn new(params: SystemParams, grid: &Grid1D, dt: f64) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::Domain(format!(
                "time step must be positive, got {dt}"
            )));
        }
        let n = grid.n();
        Ok(Stepper {
            rate1: NodeRate::new(&params.r1, grid),
            rate2: NodeRate::new(&params.r2, grid),
            diff1: ImplicitDiffusion::new(n, 1.0, dt, grid.dx())?,
            diff2: ImplicitDiffusion::new(n, params.d, dt, grid.dx())?,
            npp: grid.nodes_per_period,
            params,
            dt,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn params(&self) -> &SystemParams {
        &self.params
    }

    /// Advances `state` by `dt`: implicit diffusion, explicit reaction and competition.
    pub fn step(&mut self, state: &mut SystemState) -> Result<()> {
        let (k, alpha, dt) = (self.params.k, self.params.alpha, self.dt);
        let (a1, a2) = (self.params.a1(), self.params.a2());
        let n = state.u1.len();
        let mut phase = 0usize;
        for i in 0..n {
            let (u, v) = (state.u1[i], state.u2[i]);
            let comp = k * u * v;
            state.u1[i] = u + dt * (u * self.rate1.eval(u, phase) - comp);
            state.u2[i] = v + dt * (v * self.rate2.eval(v, phase) - alpha * comp);
            phase += 1;
            if phase == self.npp {
                phase = 0;
            }
        }
        ImplicitDiffusion::solve_pair(&self.diff1, &mut state.u1, &self.diff2, &mut state.u2);
        state.t += dt;
        state.node_steps += 2 * n as u64;
        for (u, a) in [(&mut state.u1, a1), (&mut state.u2, a2)] {
            for v in u.iter_mut() {
                if !v.is_finite() {
                    return Err(Error::Blowup { t: state.t });
                }
                if *v < 0.0 || *v > a {
                    if *v < -1e-14 * a || *v > a * (1.0 + 1e-14) {
                        state.clamp_events += 1;
                    }
                    *v = v.clamp(0.0, a);
                }
            }
        }
        Ok(())
    }
}

/// Single IMEX step without a reusable integrator.
pub fn step(state: &SystemState, params: &SystemParams, dt: f64) -> Result<SystemState> {
    let mut next = state.clone();
    Stepper::new(params.clone(), &state.grid, dt)?.step(&mut next)?;
    Ok(next)
}

/// Leftmost point where `u` drops below `level` (linear interpolation).
pub fn leftmost_below(u: &[f64], level: f64, grid: &Grid1D) -> Option<f64> {
    let i = u.iter().position(|v| *v < level)?;
    if i == 0 {
        return Some(grid.x(0));
    }
    let (a, b) = (u[i - 1], u[i]);
    let s = (a - level) / (a - b);
    Some(grid.x(i - 1) + s * grid.dx())
}

/// Rightmost point where `u` is below `level` (linear interpolation).
pub fn rightmost_below(u: &[f64], level: f64, grid: &Grid1D) -> Option<f64> {
    let i = u.iter().rposition(|v| *v < level)?;
    if i + 1 == u.len() {
        return Some(grid.x(i));
    }
    let (a, b) = (u[i], u[i + 1]);
    let s = (level - a) / (b - a);
    Some(grid.x(i) + s * grid.dx())
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct Crossing {
    pub t: f64,
    /// Leftmost point with `u1 < a1/2`.
    pub u1_level: f64,
    /// Rightmost point with `u2 < a2/2`.
    pub u2_level: f64,
    /// `int u1 u2 dx` over the window.
    pub overlap: f64,
}

/// Field samples around the front, aligned on whole periods.
#[derive(Clone, Debug, Serialize)]
pub struct Snapshot {
    pub t: f64,
    /// Grid position of the first sample (a multiple of the node spacing).
    pub first_node: i64,
    pub dx: f64,
    pub nodes_per_period: usize,
    pub u1: Vec<f64>,
    pub u2: Vec<f64>,
}

impl Snapshot {
    pub fn x(&self, i: usize) -> f64 {
        (self.first_node + i as i64) as f64 * self.dx
    }

    pub fn phase(&self, i: usize) -> usize {
        (self.first_node + i as i64).rem_euclid(self.nodes_per_period as i64) as usize
    }
}

#[derive(Clone, Debug)]
pub struct ProbeConfig {
    /// Interval between crossing-log entries.
    pub output_interval: f64,
    /// Minimum distance, in periods, between the front and either window edge.
    pub guard_periods: usize,
    pub recenter: bool,
    /// Snapshots are stored from this time on.
    pub snapshot_from: f64,
    /// Stride between stored snapshots, in crossing-log entries.
    pub snapshot_stride: usize,
    /// Half width of the stored snapshot window, in periods.
    pub snapshot_half_periods: usize,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig {
            output_interval: 0.05,
            guard_periods: 5,
            recenter: true,
            snapshot_from: f64::INFINITY,
            snapshot_stride: 1,
            snapshot_half_periods: 4,
        }
    }
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub state: SystemState,
    pub crossings: Vec<Crossing>,
    pub snapshots: Vec<Snapshot>,
    pub recenterings: usize,
    pub dt: f64,
}

/// Shifts fields by `periods` whole periods (positive moves the window right),
/// replicating edge values into vacated nodes.
pub fn recenter(state: &mut SystemState, periods: i64) {
    if periods == 0 {
        return;
    }
    let shift = periods.unsigned_abs() as usize * state.grid.nodes_per_period;
    for u in [&mut state.u1, &mut state.u2] {
        let n = u.len();
        if periods > 0 {
            let edge = u[n - 1];
            u.copy_within(shift.min(n).., 0);
            u[n.saturating_sub(shift)..].fill(edge);
        } else {
            let edge = u[0];
            u.copy_within(..n.saturating_sub(shift), shift.min(n));
            u[..shift.min(n)].fill(edge);
        }
    }
    state.grid.origin += periods;
}

/// Integrates with a fixed `dt` up to `horizon`, logging level-set crossings
/// and keeping the front in the middle of the window.
pub fn run_until_front(
    mut state: SystemState,
    params: &SystemParams,
    horizon: f64,
    dt: f64,
    probe: &ProbeConfig,
) -> Result<RunOutput> {
    let grid = state.grid;
    let mut stepper = Stepper::new(params.clone(), &grid, dt)?;
    let (a1, a2) = (params.a1(), params.a2());
    let steps_per_output = (probe.output_interval / dt).round().max(1.0) as usize;
    let total_outputs = (horizon / (steps_per_output as f64 * dt)).ceil() as usize;
    let l = grid.period;
    let guard = probe.guard_periods as f64 * l;

    let mut crossings = Vec::with_capacity(total_outputs + 1);
    let mut snapshots = Vec::new();
    let mut recenterings = 0;
    let t_start = state.t;

    let locate = |s: &SystemState| -> Result<Crossing> {
        let x1 = leftmost_below(&s.u1, 0.5 * a1, &s.grid).ok_or(Error::NoInterface { t: s.t })?;
        let x2 = rightmost_below(&s.u2, 0.5 * a2, &s.grid).ok_or(Error::NoInterface { t: s.t })?;
        let prod: Vec<f64> = s.u1.iter().zip(&s.u2).map(|(p, q)| p * q).collect();
        Ok(Crossing {
            t: s.t,
            u1_level: x1,
            u2_level: x2,
            overlap: trapezoid(&prod, s.grid.dx()),
        })
    };

    crossings.push(locate(&state)?);
    for out in 1..=total_outputs {
        for _ in 0..steps_per_output {
            stepper.step(&mut state)?;
        }
        let mut c = locate(&state)?;
        if probe.recenter {
            let center = state.grid.x0() + 0.5 * state.grid.length();
            let drift = ((c.u1_level - center) / l).round() as i64;
            if drift.abs() >= 1 {
                recenter(&mut state, drift);
                recenterings += 1;
                c = locate(&state)?;
            }
        }
        let (left, right) = (state.grid.x0(), state.grid.x0() + state.grid.length());
        for x in [c.u1_level, c.u2_level] {
            if x - left < guard || right - x < guard {
                return Err(Error::WindowOverflow { t: state.t });
            }
        }
        crossings.push(c);
        if state.t - t_start >= probe.snapshot_from - 1e-12
            && out % probe.snapshot_stride.max(1) == 0
        {
            snapshots.push(snapshot_around(
                &state,
                c.u1_level,
                probe.snapshot_half_periods,
            ));
        }
    }
    Ok(RunOutput {
        state,
        crossings,
        snapshots,
        recenterings,
        dt,
    })
}

/// Period-aligned sub-window of `state` centred on the period holding `x`.
pub fn snapshot_around(state: &SystemState, x: f64, half_periods: usize) -> Snapshot {
    let g = state.grid;
    let npp = g.nodes_per_period;
    let center_period = ((x - g.x0()) / g.period).floor() as i64;
    let lo = (center_period - half_periods as i64).max(0) as usize * npp;
    let hi = (((center_period + half_periods as i64 + 1).max(0) as usize) * npp).min(g.n() - 1);
    Snapshot {
        t: state.t,
        first_node: g.origin * npp as i64 + lo as i64,
        dx: g.dx(),
        nodes_per_period: npp,
        u1: state.u1[lo..=hi].to_vec(),
        u2: state.u2[lo..=hi].to_vec(),
    }
}

/// Writes `t, x, u1, u2, v_d` rows for one snapshot.
pub fn write_snapshot_csv<W: std::io::Write>(
    mut w: W,
    snap: &Snapshot,
    d: f64,
    alpha: f64,
) -> std::io::Result<()> {
    writeln!(w, "t,x,u1,u2,v_d")?;
    for i in 0..snap.u1.len() {
        let (u1, u2) = (snap.u1[i], snap.u2[i]);
        writeln!(
            w,
            "{},{},{},{},{}",
            snap.t,
            snap.x(i),
            u1,
            u2,
            alpha * u1 - d * u2
        )?;
    }
    Ok(())
}

/// File name `snap_t<t>.csv` for a snapshot time.
pub fn snapshot_file_name(t: f64) -> String {
    format!("snap_t{t:.4}.csv")
}
