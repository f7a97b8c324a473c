//! Method-of-lines evolution of the weighted perturbation equation, its
//! linear part and the unweighted front equation in the co-moving frame,
//! with the decay diagnostics and the Duhamel cross-check against the
//! contour Green's function.
//!
//! Space: second-order centered differences on a uniform grid with
//! Dirichlet ends. Time: SBDF2 with diffusion implicit and advection plus
//! reaction explicit, started by one Crank-Nicolson/forward-Euler step.

use std::f64::consts::PI;

use num_complex::Complex64 as C;
use serde::Serialize;
use thiserror::Error;

use crate::green_lambda::Resolvent;
use crate::laplace::{green_time_column, trapezoid_weighted, ContourParams, ContourRule, ContourSpec, LaplaceError, TimeRegime};
use crate::model::Nonlinearity;
use crate::modes::{ModeOptions, SpectralPoint};
use crate::numeric::fit::loglog_slope;
use crate::numeric::quad::GaussKronrod;
use crate::operator::{Coefficients, FrontOperator};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid grid: {0}")]
    Grid(String),
    #[error("time step {dt} exceeds the stability bound {bound:.4}")]
    Stability { dt: f64, bound: f64 },
    #[error("sup-norm grew by {growth:.3e} in one step at t = {t}")]
    Unstable { t: f64, growth: f64 },
    #[error("u = q + omega p = {u:.4} leaves the guard band at t = {t}, x = {x}")]
    GuardBand { t: f64, x: f64, u: f64 },
    #[error("initial data: {0}")]
    InitialData(String),
    #[error(transparent)]
    Laplace(#[from] LaplaceError),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SimOptions {
    pub xmin: f64,
    pub xmax: f64,
    pub h: f64,
    pub dt: f64,
    /// Admissible range of `u = q + omega p` for the weighted formulation.
    pub guard: (f64, f64),
    /// Largest admissible sup-norm growth factor per step.
    pub growth_limit: f64,
    /// Width of the strip next to each end that must stay quiet.
    pub boundary_band: f64,
    pub boundary_tol: f64,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            xmin: -100.0,
            xmax: 160.0,
            h: 0.02,
            dt: 0.01,
            guard: (-0.1, 1.1),
            growth_limit: 10.0,
            boundary_band: 10.0,
            boundary_tol: 1e-10,
        }
    }
}

/// Uniform grid `x_i = xmin + i h`, `i < n`; the two end nodes carry the
/// Dirichlet values.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Grid {
    pub xmin: f64,
    pub h: f64,
    pub n: usize,
}

impl Grid {
    pub fn new(xmin: f64, xmax: f64, h: f64) -> Result<Self, SimError> {
        if !(h > 0.0 && xmax > xmin && xmin.is_finite() && xmax.is_finite()) {
            return Err(SimError::Grid(format!("need xmin < xmax and h > 0 (got [{xmin}, {xmax}], h = {h})")));
        }
        let cells = ((xmax - xmin) / h).round();
        if (cells * h - (xmax - xmin)).abs() > 1e-9 * (xmax - xmin) || cells < 4.0 {
            return Err(SimError::Grid(format!("h = {h} does not divide [{xmin}, {xmax}] into at least 4 cells")));
        }
        Ok(Self { xmin, h, n: cells as usize + 1 })
    }

    pub fn x(&self, i: usize) -> f64 {
        self.xmin + i as f64 * self.h
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.x(i)).collect()
    }

    pub fn xmax(&self) -> f64 {
        self.x(self.n - 1)
    }

    pub fn sample(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        (0..self.n).map(|i| f(self.x(i))).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct HistoryPoint {
    pub t: f64,
    /// `sup_x |p|`.
    pub sup: f64,
    /// `sup_x |p| / (1 + |x|)`.
    pub weighted_sup: f64,
    /// Running `sup_{tau <= t} (1 + tau)^{3/2} sup_x |p(tau, x)| / (1 + |x|)`.
    pub theta: f64,
}

/// Field on the grid together with the SBDF2 memory.
#[derive(Clone, Debug)]
pub struct SimState {
    pub grid: Grid,
    pub p: Vec<f64>,
    pub t: f64,
    pub steps: usize,
    pub theta: f64,
    /// Largest `|p|` seen in the boundary strips.
    pub boundary_max: f64,
    pub history: Vec<HistoryPoint>,
    prev: Option<(Vec<f64>, Vec<f64>)>,
}

impl SimState {
    pub fn sup(&self) -> f64 {
        self.p.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn weighted_sup(&self) -> f64 {
        self.p.iter().enumerate().fold(0.0, |m, (i, v)| m.max(v.abs() / (1.0 + self.grid.x(i).abs())))
    }

    pub fn snapshot(&self) -> HistoryPoint {
        HistoryPoint { t: self.t, sup: self.sup(), weighted_sup: self.weighted_sup(), theta: self.theta }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Dynamics {
    /// `p_t = L p`.
    Linear,
    /// `p_t = L p + N(q, omega p) p`.
    Nonlinear,
    /// `u_t = u_xx + c u_x + f(u)`.
    Full,
}

/// LU factors of the constant tridiagonal matrix `a I - D_xx` on the
/// interior nodes.
#[derive(Clone, Debug)]
struct Factor {
    off: f64,
    c: Vec<f64>,
    inv: Vec<f64>,
}

impl Factor {
    fn new(a: f64, h: f64, m: usize) -> Self {
        let diag = a + 2.0 / (h * h);
        let off = -1.0 / (h * h);
        let mut c = vec![0.0; m];
        let mut inv = vec![0.0; m];
        let mut beta = diag;
        inv[0] = 1.0 / beta;
        for i in 1..m {
            c[i - 1] = off * inv[i - 1];
            beta = diag - off * c[i - 1];
            inv[i] = 1.0 / beta;
        }
        Self { off, c, inv }
    }

    fn solve(&self, r: &mut [f64]) {
        let m = r.len();
        r[0] *= self.inv[0];
        for i in 1..m {
            r[i] = (r[i] - self.off * r[i - 1]) * self.inv[i];
        }
        for i in (0..m - 1).rev() {
            r[i] -= self.c[i] * r[i + 1];
        }
    }
}

/// Reaction data of the weighted formulation sampled on the grid.
#[derive(Clone, Debug)]
struct Background {
    q: Vec<f64>,
    omega: Vec<f64>,
    nl: Nonlinearity<f64>,
}

#[derive(Clone, Debug)]
pub struct Simulator {
    pub grid: Grid,
    pub dt: f64,
    pub dynamics: Dynamics,
    pub opts: SimOptions,
    /// Advection coefficient at the nodes.
    adv: Vec<f64>,
    /// Linear reaction coefficient at the nodes (zero for `Full`).
    lin: Vec<f64>,
    background: Option<Background>,
    speed: f64,
    start: Factor,
    bdf: Factor,
}

impl Simulator {
    /// `p_t = p_xx + zeta1 p_x + zeta0 p`.
    pub fn linear(op: &dyn Coefficients, opts: &SimOptions) -> Result<Self, SimError> {
        let grid = Grid::new(opts.xmin, opts.xmax, opts.h)?;
        let adv = grid.sample(|x| op.zeta1(x));
        let lin = grid.sample(|x| op.zeta0(x));
        Self::assemble(grid, Dynamics::Linear, opts, adv, lin, None, 0.0)
    }

    /// The weighted perturbation equation about the front of `op`.
    pub fn nonlinear(op: &FrontOperator, opts: &SimOptions) -> Result<Self, SimError> {
        let grid = Grid::new(opts.xmin, opts.xmax, opts.h)?;
        let adv = grid.sample(|x| op.zeta1(x));
        let lin = grid.sample(|x| op.zeta0(x));
        let bg = Background { q: grid.sample(|x| op.profile.q_at(x)), omega: grid.sample(|x| op.omega(x)), nl: op.nl };
        Self::assemble(grid, Dynamics::Nonlinear, opts, adv, lin, Some(bg), 0.0)
    }

    /// The unweighted equation `u_t = u_xx + c* u_x + f(u)` in the frame of
    /// the front of `op`.
    pub fn full(op: &FrontOperator, opts: &SimOptions) -> Result<Self, SimError> {
        let grid = Grid::new(opts.xmin, opts.xmax, opts.h)?;
        let c = op.params.c_star;
        let adv = vec![c; grid.n];
        let lin = vec![0.0; grid.n];
        let bg = Background { q: grid.sample(|x| op.profile.q_at(x)), omega: grid.sample(|x| op.omega(x)), nl: op.nl };
        Self::assemble(grid, Dynamics::Full, opts, adv, lin, Some(bg), c)
    }

    fn assemble(
        grid: Grid,
        dynamics: Dynamics,
        opts: &SimOptions,
        adv: Vec<f64>,
        lin: Vec<f64>,
        background: Option<Background>,
        speed: f64,
    ) -> Result<Self, SimError> {
        let dt = opts.dt;
        let m = grid.n - 2;
        let mut sim = Self {
            grid,
            dt,
            dynamics,
            opts: *opts,
            adv,
            lin,
            background,
            speed,
            start: Factor::new(2.0 / dt, grid.h, m),
            bdf: Factor::new(1.5 / dt, grid.h, m),
        };
        let bound = sim.stability_bound();
        if !(dt > 0.0 && dt <= bound) {
            return Err(SimError::Stability { dt, bound });
        }
        sim.lin.shrink_to_fit();
        Ok(sim)
    }

    /// Largest step with `dt (max zeta1^2 / 2 + max |reaction|) <= 1/2`:
    /// the explicit advection is held in check by the implicit diffusion as
    /// long as `dt a^2` stays of order one, and the explicit reaction by
    /// `dt |b| < 1`.
    pub fn stability_bound(&self) -> f64 {
        let a = self.adv.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut b = self.lin.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if let Some(bg) = &self.background {
            b = b.max(bg.q.iter().fold(0.0f64, |m, &q| m.max(bg.nl.df(q).abs())));
        }
        0.5 / (0.5 * a * a + b).max(1e-12)
    }

    /// State at `t = 0` with field `p0`; the end values are the Dirichlet
    /// data (zero for the weighted formulations).
    pub fn state(&self, p0: Vec<f64>) -> Result<SimState, SimError> {
        if p0.len() != self.grid.n {
            return Err(SimError::InitialData(format!("expected {} samples, got {}", self.grid.n, p0.len())));
        }
        if p0.iter().any(|v| !v.is_finite()) {
            return Err(SimError::InitialData("non-finite sample".into()));
        }
        if self.dynamics == Dynamics::Nonlinear {
            self.check_guard(&p0, 0.0)?;
        }
        let mut s = SimState {
            grid: self.grid,
            p: p0,
            t: 0.0,
            steps: 0,
            theta: 0.0,
            boundary_max: 0.0,
            history: Vec::new(),
            prev: None,
        };
        s.theta = s.weighted_sup();
        s.boundary_max = self.boundary_max(&s.p);
        Ok(s)
    }

    /// `p0` sampled from a function.
    pub fn state_from(&self, f: impl Fn(f64) -> f64) -> Result<SimState, SimError> {
        self.state(self.grid.sample(f))
    }

    /// Nonlinear forcing `N(q, omega p) p` (zero for the linear dynamics).
    pub fn forcing(&self, p: &[f64]) -> Vec<f64> {
        match (&self.background, self.dynamics) {
            (Some(bg), Dynamics::Nonlinear) => {
                p.iter().enumerate().map(|(i, &v)| bg.nl.remainder(bg.q[i], bg.omega[i] * v) * v).collect()
            }
            _ => vec![0.0; p.len()],
        }
    }

    /// Explicit part of the right-hand side at the interior nodes.
    fn explicit(&self, v: &[f64]) -> Vec<f64> {
        let n = self.grid.n;
        let inv2h = 0.5 / self.grid.h;
        let mut e = vec![0.0; n];
        for i in 1..n - 1 {
            let dx = (v[i + 1] - v[i - 1]) * inv2h;
            e[i] = self.adv[i] * dx + self.lin[i] * v[i];
        }
        match (&self.background, self.dynamics) {
            (Some(bg), Dynamics::Nonlinear) => {
                for i in 1..n - 1 {
                    e[i] += bg.nl.remainder(bg.q[i], bg.omega[i] * v[i]) * v[i];
                }
            }
            (Some(bg), Dynamics::Full) => {
                for i in 1..n - 1 {
                    e[i] += bg.nl.f(v[i]);
                }
            }
            _ => {}
        }
        e
    }

    fn check_guard(&self, p: &[f64], t: f64) -> Result<(), SimError> {
        if let Some(bg) = &self.background {
            let (lo, hi) = self.opts.guard;
            for i in 0..p.len() {
                let u = bg.q[i] + bg.omega[i] * p[i];
                if !(lo..=hi).contains(&u) {
                    return Err(SimError::GuardBand { t, x: self.grid.x(i), u });
                }
            }
        }
        Ok(())
    }

    fn boundary_max(&self, p: &[f64]) -> f64 {
        if self.dynamics == Dynamics::Full {
            return 0.0;
        }
        let k = ((self.opts.boundary_band / self.grid.h).round() as usize).min(self.grid.n);
        p[..k].iter().chain(&p[self.grid.n - k..]).fold(0.0, |m, v| m.max(v.abs()))
    }

    /// One IMEX step.
    pub fn step(&self, s: &mut SimState) -> Result<(), SimError> {
        let n = self.grid.n;
        let dt = self.dt;
        let h2 = 1.0 / (self.grid.h * self.grid.h);
        let before = s.sup();
        let e = self.explicit(&s.p);
        let (b0, b1) = (s.p[0], s.p[n - 1]);
        let mut r: Vec<f64> = vec![0.0; n - 2];
        match &s.prev {
            None => {
                // (2/dt - D) v1 = (2/dt + D) v0 + 2 E(v0)
                for i in 1..n - 1 {
                    let lap = (s.p[i + 1] - 2.0 * s.p[i] + s.p[i - 1]) * h2;
                    r[i - 1] = 2.0 / dt * s.p[i] + lap + 2.0 * e[i];
                }
                r[0] += b0 * h2;
                r[n - 3] += b1 * h2;
                self.start.solve(&mut r);
            }
            Some((p_old, e_old)) => {
                // (3/(2dt) - D) v+ = (4 v - v-) / (2dt) + 2 E(v) - E(v-)
                for i in 1..n - 1 {
                    r[i - 1] = (4.0 * s.p[i] - p_old[i]) / (2.0 * dt) + 2.0 * e[i] - e_old[i];
                }
                r[0] += b0 * h2;
                r[n - 3] += b1 * h2;
                self.bdf.solve(&mut r);
            }
        }
        let mut next = Vec::with_capacity(n);
        next.push(b0);
        next.extend_from_slice(&r);
        next.push(b1);
        let old = std::mem::replace(&mut s.p, next);
        s.prev = Some((old, e));
        s.steps += 1;
        s.t = s.steps as f64 * dt;
        let after = s.sup();
        if !after.is_finite() || s.p.iter().any(|v| !v.is_finite()) || (before > 1e-300 && after > self.opts.growth_limit * before) {
            return Err(SimError::Unstable { t: s.t, growth: after / before });
        }
        if self.dynamics == Dynamics::Nonlinear {
            self.check_guard(&s.p, s.t)?;
        }
        s.theta = s.theta.max((1.0 + s.t).powf(1.5) * s.weighted_sup());
        s.boundary_max = s.boundary_max.max(self.boundary_max(&s.p));
        Ok(())
    }

    /// Step until `t_final`, recording a history point at each of the
    /// (ascending) `samples` and calling `each` after every step.
    pub fn run(
        &self,
        s: &mut SimState,
        t_final: f64,
        samples: &[f64],
        mut each: impl FnMut(&SimState),
    ) -> Result<(), SimError> {
        let target = (t_final / self.dt).round() as usize;
        let mut next = samples.iter().position(|&t| t > s.t - 0.5 * self.dt).unwrap_or(samples.len());
        let record = |s: &mut SimState, next: &mut usize| {
            while *next < samples.len() && (samples[*next] - s.t).abs() <= 0.5 * self.dt {
                let p = s.snapshot();
                s.history.push(p);
                *next += 1;
            }
        };
        record(s, &mut next);
        while s.steps < target {
            self.step(s)?;
            record(s, &mut next);
            each(s);
        }
        Ok(())
    }

    pub fn speed(&self) -> f64 {
        self.speed
    }

    /// `(q, omega)` on the grid, when the dynamics carry a front.
    pub fn background(&self) -> Option<(&[f64], &[f64])> {
        self.background.as_ref().map(|b| (b.q.as_slice(), b.omega.as_slice()))
    }
}

/// Norms of `p0 = v0 / omega` entering the smallness hypothesis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct InitialNorms {
    pub sup: f64,
    /// `int (1 + |x|) |p0|`.
    pub weighted_l1: f64,
    /// `sup + weighted_l1`.
    pub total: f64,
    /// `int (1 + |y|)^3 omega(y) dy`.
    pub omega_moment3: f64,
}

pub fn initial_norms(grid: &Grid, p0: &[f64], omega: &[f64]) -> InitialNorms {
    let h = grid.h;
    let sup = p0.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let trap = |f: &dyn Fn(usize) -> f64| {
        let n = grid.n;
        (0..n).map(|i| f(i) * if i == 0 || i + 1 == n { 0.5 * h } else { h }).sum::<f64>()
    };
    let weighted_l1 = trap(&|i| (1.0 + grid.x(i).abs()) * p0[i].abs());
    let omega_moment3 = trap(&|i| (1.0 + grid.x(i).abs()).powi(3) * omega[i]);
    InitialNorms { sup, weighted_l1, total: sup + weighted_l1, omega_moment3 }
}

/// `omega_inf = sup (1 + |x|) omega(x)`: golden-section refinement of the
/// best point of a coarse scan over `[-200, 200]`.
pub fn omega_const(op: &FrontOperator) -> f64 {
    let g = |x: f64| (1.0 + x.abs()) * op.omega(x);
    let mut best = (0.0, f64::NEG_INFINITY);
    for i in 0..=8000 {
        let x = -200.0 + i as f64 * 0.05;
        let v = g(x);
        if v > best.1 {
            best = (x, v);
        }
    }
    let (mut a, mut b) = (best.0 - 0.05, best.0 + 0.05);
    let r = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..100 {
        let c = b - r * (b - a);
        let d = a + r * (b - a);
        if g(c) > g(d) {
            b = d;
        } else {
            a = c;
        }
    }
    g(0.5 * (a + b)).max(best.1)
}

#[derive(Clone, Debug, Serialize)]
pub struct DecayReport {
    pub history: Vec<HistoryPoint>,
    /// `(t, Theta(t))`.
    pub theta_series: Vec<(f64, f64)>,
    /// Log-log slope of `sup_x |p| / (1 + |x|)` against `1 + t` on `[10, T]`.
    pub slope: f64,
    pub omega_const: f64,
    pub initial: InitialNorms,
    /// Largest `|p|` in the boundary strips over the run.
    pub boundary_max: f64,
    pub boundary_ok: bool,
    /// Largest `|N(q, omega p) p| / (chi omega p^2)` over the run.
    pub chi_ratio: f64,
}

/// Log-spaced sample times on `[1, t_final]` together with `0` and `1`.
pub fn default_sample_times(t_final: f64, count: usize) -> Vec<f64> {
    let mut out = vec![0.0];
    let top = (1.0 + t_final).ln();
    for k in 0..count {
        let t = (top * k as f64 / (count - 1).max(1) as f64).exp() - 1.0;
        if t >= 1.0 - 1e-12 {
            out.push(t.max(1.0));
        }
    }
    if t_final >= 1.0 {
        out.push(1.0);
    }
    out.push(t_final);
    out.sort_by(|a, b| a.partial_cmp(b).unwrap());
    out.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
    out
}

/// `chi(R) = sup_{|s| <= R + 1} |f''(s)| / 2`.
pub fn chi(nl: &Nonlinearity<f64>, r: f64) -> f64 {
    (0..=2000).map(|i| -(r + 1.0) + 2.0 * (r + 1.0) * i as f64 / 2000.0).fold(0.0f64, |m, s| m.max(nl.d2f(s).abs())) / 2.0
}

/// Evolve the nonlinear weighted equation from `p0` and collect the decay
/// diagnostics.
pub fn run_decay_experiment(
    op: &FrontOperator,
    p0: &dyn Fn(f64) -> f64,
    t_final: f64,
    samples: &[f64],
    opts: &SimOptions,
) -> Result<DecayReport, SimError> {
    let sim = Simulator::nonlinear(op, opts)?;
    let mut s = sim.state_from(p0)?;
    let (q, omega) = sim.background().expect("nonlinear dynamics carry a front");
    if let Some(i) = (0..q.len()).find(|&i| !(-1e-12..=1.0 + 1e-12).contains(&(q[i] + omega[i] * s.p[i]))) {
        return Err(SimError::InitialData(format!("u0 = q + omega p0 leaves [0, 1] at x = {}", sim.grid.x(i))));
    }
    let initial = initial_norms(&sim.grid, &s.p, omega);
    let (q, omega) = (q.to_vec(), omega.to_vec());
    let chi_r = chi(&op.nl, 1.0);
    let mut chi_ratio = 0.0f64;
    let mut check_chi = |st: &SimState| {
        if st.steps % 10 != 0 {
            return;
        }
        for i in 0..st.p.len() {
            let p = st.p[i];
            let den = chi_r * omega[i] * p * p;
            if den > 1e-300 {
                let num = (op.nl.remainder(q[i], omega[i] * p) * p).abs();
                chi_ratio = chi_ratio.max(num / den);
            }
        }
    };
    sim.run(&mut s, t_final, samples, &mut check_chi)?;
    let fit: Vec<&HistoryPoint> = s.history.iter().filter(|p| p.t >= 10.0 - 1e-9).collect();
    let t: Vec<f64> = fit.iter().map(|p| 1.0 + p.t).collect();
    let v: Vec<f64> = fit.iter().map(|p| p.weighted_sup).collect();
    let slope = loglog_slope(&t, &v).map_or(f64::NAN, |f| f.slope);
    Ok(DecayReport {
        theta_series: s.history.iter().map(|p| (p.t, p.theta)).collect(),
        history: s.history.clone(),
        slope,
        omega_const: omega_const(op),
        initial,
        boundary_max: s.boundary_max,
        boundary_ok: s.boundary_max <= opts.boundary_tol,
        chi_ratio,
    })
}

/// Snapshots of a run every `every` time units, with the forcing.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub grid: Grid,
    pub times: Vec<f64>,
    pub p: Vec<Vec<f64>>,
    pub forcing: Vec<Vec<f64>>,
}

impl Trajectory {
    /// Run `sim` from `p0` to `t_final`, keeping snapshots every `every`
    /// (a multiple of the step).
    pub fn record(sim: &Simulator, p0: Vec<f64>, t_final: f64, every: f64) -> Result<Self, SimError> {
        let stride = (every / sim.dt).round().max(1.0) as usize;
        let mut s = sim.state(p0)?;
        let mut out = Self { grid: sim.grid, times: vec![0.0], p: vec![s.p.clone()], forcing: vec![sim.forcing(&s.p)] };
        let target = (t_final / sim.dt).round() as usize;
        while s.steps < target {
            sim.step(&mut s)?;
            if s.steps % stride == 0 || s.steps == target {
                out.times.push(s.t);
                out.forcing.push(sim.forcing(&s.p));
                out.p.push(s.p.clone());
            }
        }
        Ok(out)
    }

    fn index_of(&self, t: f64) -> Option<usize> {
        self.times.iter().position(|&s| (s - t).abs() < 1e-9 * (1.0 + t))
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct DuhamelReport {
    pub t: f64,
    /// `max |p - Duhamel| / sup |p|` over the window nodes.
    pub residual: f64,
    pub abs_residual: f64,
    pub window: (f64, f64),
    pub nodes: usize,
    pub lambda_evaluations: usize,
}

/// `(e^z - 1) / z` and `(e^z (z - 1) + 1) / z^2`.
fn phi12(z: C) -> (C, C) {
    if z.norm() < 0.1 {
        let mut p1 = C::new(0.0, 0.0);
        let mut p2 = C::new(0.0, 0.0);
        let mut term = C::new(1.0, 0.0);
        for n in 0..16 {
            p1 += term / (n + 1) as f64;
            p2 += term / (n + 2) as f64;
            term *= z / (n + 1) as f64;
        }
        (p1, p2)
    } else {
        let e = z.exp();
        ((e - 1.0) / z, (e * (z - 1.0) + 1.0) / (z * z))
    }
}

/// Both sides of
/// `p(t) = G(t) p0 + int_0^t G(t - tau) N(q, omega p) p (tau) dtau`
/// on the nodes where the trajectory is non-negligible.
///
/// The `s = t - tau` axis is split into `[0, s0]`, dyadic bands from `s0`
/// and a final band ending at `t`; each band shares one contour rule. In
/// `tau` the forcing is linear between snapshots and `e^{lambda s}` is
/// integrated exactly against it, so every contour node needs a single
/// resolvent application. On `[0, s0]` the trapezoid rule uses
/// `G(0) = I`. The rays are tilted clear of the left essential spectrum.
pub fn duhamel_residual(
    op: &dyn Coefficients,
    traj: &Trajectory,
    t: f64,
    stride: usize,
    params: &ContourParams,
    opts: &ModeOptions,
) -> Result<DuhamelReport, SimError> {
    let params = &params.clear_of_left_curve(op);
    let it = traj.index_of(t).ok_or_else(|| SimError::InitialData(format!("no snapshot at t = {t}")))?;
    let dtau = traj.times[1] - traj.times[0];
    let has_forcing = (0..=it).any(|k| traj.forcing[k].iter().any(|v| *v != 0.0));
    if has_forcing && dtau > 0.25 + 1e-12 {
        return Err(SimError::InitialData(format!("snapshot spacing {dtau} exceeds 0.25")));
    }
    // Window: nodes where the field or forcing is above 1e-12 of its peak.
    let peak = (0..=it)
        .flat_map(|k| traj.p[k].iter().chain(&traj.forcing[k]))
        .fold(0.0f64, |m, v| m.max(v.abs()));
    let n = traj.grid.n;
    let active = |i: usize| (0..=it).any(|k| traj.p[k][i].abs() > 1e-12 * peak || traj.forcing[k][i].abs() > 1e-12 * peak);
    let lo = (0..n).find(|&i| active(i)).unwrap_or(0);
    let hi = (0..n).rev().find(|&i| active(i)).unwrap_or(n - 1);
    let stride = stride.max(1);
    let pad = (2.0 / traj.grid.h) as usize;
    let lo = lo.saturating_sub(pad) / stride * stride;
    let hi = (hi + pad).min(n - 1);
    let idx: Vec<usize> = (lo..=hi).step_by(stride).collect();
    let nodes: Vec<f64> = idx.iter().map(|&i| traj.grid.x(i)).collect();
    let width = nodes[nodes.len() - 1] - nodes[0];
    let weighted = |v: &[f64]| -> Vec<C> {
        let vals: Vec<f64> = idx.iter().map(|&i| v[i]).collect();
        trapezoid_weighted(&nodes, &vals)
    };
    let spec_for = |s: f64| {
        ContourSpec::from_geometry(TimeRegime::of(s, 0.0, params.k_split), params.rho_min, params.delta0, params.theta)
    };

    // (s_lo, s_hi) bands, ascending in s.
    let s0 = dtau;
    let mut bands: Vec<(f64, f64)> = Vec::new();
    if has_forcing {
        if t < 2.0 * s0 - 1e-12 {
            return Err(SimError::InitialData(format!("t = {t} is shorter than two snapshot steps")));
        }
        let mut a = s0;
        while a < t - 1e-9 {
            let b = if 2.0 * a >= t - 1e-9 { t } else { 2.0 * a };
            bands.push((a, b));
            a = b;
        }
    } else {
        bands.push((t, t));
    }

    let p0w = weighted(&traj.p[0]);
    let mut acc = vec![C::new(0.0, 0.0); nodes.len()];
    // [0, s0] with G(0) = I: (s0/2) F(t).
    if has_forcing {
        for (a, &i) in acc.iter_mut().zip(&idx) {
            *a += C::new(0.0, 0.5 * s0 * traj.forcing[it][i]);
        }
    }
    let mut evaluations = 0;
    for (bi, &(sa, sb)) in bands.iter().enumerate() {
        let rule = ContourRule::new(&spec_for(sa), sa, sb, width, 1.0);
        // Snapshot pieces of the band: s from s_j to s_{j+1} = s_j + dtau,
        // tau = t - s.
        let mut pieces: Vec<(f64, usize, usize)> = Vec::new();
        if has_forcing {
            let mut s = sa;
            while s < sb - 1e-9 {
                let ka = traj.index_of(t - s).expect("band edges on the snapshot grid");
                let kb = traj.index_of(t - s - dtau).expect("band edges on the snapshot grid");
                pieces.push((s, ka, kb));
                s += dtau;
            }
        }
        let fw: Vec<Vec<C>> = (0..traj.times.len()).map(|_| Vec::new()).collect();
        let mut fw = fw;
        for &(_, ka, kb) in &pieces {
            for k in [ka, kb] {
                if fw[k].is_empty() {
                    fw[k] = weighted(&traj.forcing[k]);
                }
            }
        }
        let first_half = if bi == 0 && has_forcing { Some(weighted(&traj.forcing[traj.index_of(t - s0).unwrap()])) } else { None };
        for (k, &lambda) in rule.lambdas.iter().enumerate() {
            let mut src = vec![C::new(0.0, 0.0); nodes.len()];
            for &(s, ka, kb) in &pieces {
                let (p1, p2) = phi12(lambda * dtau);
                let scale = (lambda * s).exp() * dtau;
                let (ca, cb) = (scale * (p1 - p2), scale * p2);
                for ((d, fa), fb) in src.iter_mut().zip(&fw[ka]).zip(&fw[kb]) {
                    *d += ca * fa + cb * fb;
                }
            }
            if let Some(fh) = &first_half {
                let c = (lambda * s0).exp() * (0.5 * s0);
                for (d, f) in src.iter_mut().zip(fh) {
                    *d += c * f;
                }
            }
            if bi + 1 == bands.len() {
                let c = (lambda * t).exp();
                for (d, f) in src.iter_mut().zip(&p0w) {
                    *d += c * f;
                }
            }
            let res = Resolvent::new(op, SpectralPoint::at(lambda), &nodes, opts).map_err(LaplaceError::from)?;
            let w = rule.weights[k] / PI;
            for (a, u) in acc.iter_mut().zip(res.apply(&src)) {
                *a += w * u;
            }
            evaluations += 1;
        }
    }
    let p_t: Vec<f64> = idx.iter().map(|&i| traj.p[it][i]).collect();
    let sup = p_t.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let abs_residual = p_t.iter().zip(&acc).fold(0.0f64, |m, (p, a)| m.max((p - a.im).abs()));
    Ok(DuhamelReport {
        t,
        residual: abs_residual / sup.max(1e-300),
        abs_residual,
        window: (nodes[0], nodes[nodes.len() - 1]),
        nodes: nodes.len(),
        lambda_evaluations: evaluations,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CrossCheck {
    pub t: f64,
    /// `max |p - G| / max |G|` over the comparison nodes.
    pub rel_error: f64,
    pub sup: f64,
}

/// Evolve `p0 = G(eps, ., y0)` with the linear dynamics and compare with
/// `G(t, ., y0)` from the contour at each of the ascending `times`. The
/// semigroup property makes the comparison exact up to discretization, so
/// no sifting error enters. `y0` is moved to the nearest grid node.
pub fn cross_check_green(
    op: &dyn Coefficients,
    y0: f64,
    eps: f64,
    times: &[f64],
    sim_opts: &SimOptions,
    params: &ContourParams,
    mode_opts: &ModeOptions,
) -> Result<Vec<CrossCheck>, SimError> {
    let sim = Simulator::linear(op, sim_opts)?;
    let grid = sim.grid;
    let j0 = ((y0 - grid.xmin) / grid.h).round() as usize;
    if j0 == 0 || j0 >= grid.n - 1 {
        return Err(SimError::InitialData(format!("y0 = {y0} lies outside the grid")));
    }
    // Source: G(eps) on the nodes within 40 eps^{1/2} + 1 of y0.
    let reach = ((40.0 * eps.sqrt() + 1.0) / grid.h) as usize;
    let lo = j0.saturating_sub(reach).max(1);
    let hi = (j0 + reach).min(grid.n - 2);
    let near: Vec<f64> = (lo..=hi).map(|i| grid.x(i)).collect();
    let col = green_time_column(op, eps, &near, j0 - lo, params, mode_opts)?;
    let mut p0 = vec![0.0; grid.n];
    p0[lo..=hi].copy_from_slice(&col);
    // Comparison nodes about 0.2 apart, through y0, away from the ends.
    let stride = ((0.2 / grid.h).round() as usize).max(1);
    let band = ((sim_opts.boundary_band / grid.h).round() as usize).max(1);
    let first = j0 - (j0 - band) / stride * stride;
    let idx: Vec<usize> = (first..grid.n - band).step_by(stride).collect();
    let nodes: Vec<f64> = idx.iter().map(|&i| grid.x(i)).collect();
    let jc = idx.iter().position(|&i| i == j0).expect("comparison nodes pass through y0");
    let mut s = sim.state(p0)?;
    let mut out = Vec::with_capacity(times.len());
    for &t in times {
        sim.run(&mut s, t - eps, &[], |_| {})?;
        let g = green_time_column(op, t, &nodes, jc, params, mode_opts)?;
        let sup = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let err = idx.iter().zip(&g).fold(0.0f64, |m, (&i, v)| m.max((s.p[i] - v).abs()));
        out.push(CrossCheck { t, rel_error: err / sup.max(1e-300), sup });
    }
    Ok(out)
}

/// `(1 + t)^{3/2} int_0^t (1 + t - tau)^{-3/2} (1 + tau)^{-3} dtau`.
pub fn convolution_integral(t: f64) -> (f64, f64) {
    if t <= 0.0 {
        return (0.0, 0.0);
    }
    let gk = GaussKronrod::new(1e-12, 1e-300);
    let f = |tau: f64| (1.0 + t - tau).powf(-1.5) * (1.0 + tau).powi(-3);
    // Both factors peak at an end; split there.
    let mid = 0.5 * t;
    let a = gk.integrate(f, 0.0, mid);
    let b = gk.integrate(f, mid, t);
    let value: f64 = a.value + b.value;
    (value, a.error + b.error)
}

#[derive(Clone, Debug, Serialize)]
pub struct ConvolutionCheck {
    /// `(t, LHS, LHS (1 + t)^{3/2})`.
    pub samples: Vec<(f64, f64, f64)>,
    pub sup_scaled: f64,
    /// Relative change of the scaled value between the last two samples.
    pub plateau_change: f64,
}

pub fn convolution_inequality_check(times: &[f64]) -> ConvolutionCheck {
    let samples: Vec<(f64, f64, f64)> = times
        .iter()
        .map(|&t| {
            let (v, _) = convolution_integral(t);
            (t, v, v * (1.0 + t).powf(1.5))
        })
        .collect();
    let sup_scaled = samples.iter().fold(0.0f64, |m, s| m.max(s.2));
    let plateau_change = match samples.len() {
        0 | 1 => 0.0,
        k => (samples[k - 1].2 - samples[k - 2].2).abs() / samples[k - 2].2.abs().max(1e-300),
    };
    ConvolutionCheck { samples, sup_scaled, plateau_change }
}
