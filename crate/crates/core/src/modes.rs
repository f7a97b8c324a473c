//! Jost-type solutions of `(L - lambda) P = 0` written as envelopes
//! `P = e^{rate x} Z(x)` with `Z(x) -> (1, rate)` at the normalizing end.
//!
//! | mode   | rate                 | normalized at | integrated |
//! |--------|----------------------|---------------|------------|
//! | phi+   | decaying root at +oo | +oo           | backward   |
//! | psi+   | growing root at +oo  | +oo           | backward   |
//! | phi-   | mu_+ at -oo          | -oo           | forward    |
//! | psi-   | mu_- at -oo          | -oo           | backward   |
//!
//! Outside `[left_edge, right_edge]` the coefficients are constant and the
//! solution is continued with the exact matrix exponential.

use num_complex::Complex64 as C;
use serde::Serialize;
use thiserror::Error;

use crate::model::ModelError;
use crate::numeric::linalg::LinalgError;
use crate::numeric::ode::{Dopri5, OdeError, StepStats};
use crate::operator::Coefficients;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModeError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Ode(#[from] OdeError),
    #[error("psi+ undefined: 2 Re sqrt(lambda) = {two_re_sqrt} >= alpha = {alpha}")]
    PsiPlusUndefined { two_re_sqrt: f64, alpha: f64 },
    #[error("left rates coincide at lambda = {0}")]
    DegenerateRates(C),
    #[error("output nodes must be finite and ascending")]
    BadNodes,
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum ModeKind {
    PhiPlus,
    PhiMinus,
    PsiPlus,
    PsiMinus,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Region {
    /// `|lambda| <= M_s`, right of the left essential curve, off the cut.
    Small,
    Mid,
    /// `|lambda| >= M_l` inside the sector `Re >= -delta0 - delta1 |Im|`.
    Large,
    /// On the cut or left of the essential spectrum.
    Outside,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Thresholds {
    pub m_small: f64,
    pub m_large: f64,
    pub delta0: f64,
    pub delta1: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self { m_small: 0.5, m_large: 10.0, delta0: 0.05, delta1: (std::f64::consts::PI / 12.0).tan() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SpectralPoint {
    pub lambda: C,
    /// Principal branch, `Re >= 0`.
    pub sqrt_lambda: C,
    pub region: Region,
}

impl SpectralPoint {
    pub fn classify(lambda: C, op: &dyn Coefficients, thr: &Thresholds) -> Self {
        let r = lambda.norm();
        let on_cut = lambda.im == 0.0 && lambda.re < 0.0;
        let right_of_curve = op.left_curve_distance(lambda) > 0.0;
        let region = if on_cut {
            Region::Outside
        } else if r <= thr.m_small && right_of_curve {
            Region::Small
        } else if r >= thr.m_large && lambda.re >= -thr.delta0 - thr.delta1 * lambda.im.abs() {
            Region::Large
        } else if right_of_curve {
            Region::Mid
        } else {
            Region::Outside
        };
        Self { lambda, sqrt_lambda: lambda.sqrt(), region }
    }

    /// A point with its region left unclassified (`Mid`).
    pub fn at(lambda: C) -> Self {
        Self { lambda, sqrt_lambda: lambda.sqrt(), region: Region::Mid }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct ModeOptions {
    pub rtol: f64,
    pub h_max: f64,
}

impl Default for ModeOptions {
    fn default() -> Self {
        Self { rtol: 1e-10, h_max: 1.0 }
    }
}

/// A mode sampled at ascending `nodes`: `P(x_i) = exp(rate x_i + s_i) z_i`.
#[derive(Clone, Debug)]
pub struct ModeSolution {
    pub kind: ModeKind,
    pub point: SpectralPoint,
    pub rate: C,
    pub nodes: Vec<f64>,
    pub log_scale: Vec<f64>,
    pub z: Vec<[C; 2]>,
    pub stats: StepStats,
}

impl ModeSolution {
    /// Envelope `Z(x_i) = e^{-rate x_i} P(x_i)`.
    pub fn envelope(&self, i: usize) -> [C; 2] {
        let e = self.log_scale[i].exp();
        [self.z[i][0] * e, self.z[i][1] * e]
    }

    /// Remainder `theta_1 = Z_1 - 1`.
    pub fn theta1(&self, i: usize) -> C {
        self.envelope(i)[0] - 1.0
    }

    /// Remainder `theta_2 = Z_2 - rate`.
    pub fn theta2(&self, i: usize) -> C {
        self.envelope(i)[1] - self.rate
    }

    /// `(P, P')` at node `i`.
    pub fn value(&self, i: usize) -> [C; 2] {
        let e = (self.rate * self.nodes[i] + self.log_scale[i]).exp();
        [self.z[i][0] * e, self.z[i][1] * e]
    }

    pub fn index_of(&self, x: f64) -> Option<usize> {
        self.nodes.iter().position(|&v| v == x)
    }
}

/// System matrix `[[0, 1], [lambda - zeta0(x), -zeta1(x)]]` of `P' = A P`.
pub fn assemble_a(op: &dyn Coefficients, x: f64, lambda: C) -> [[C; 2]; 2] {
    [[C::new(0.0, 0.0), C::new(1.0, 0.0)], [lambda - op.zeta0(x), C::new(-op.zeta1(x), 0.0)]]
}

/// `e^{M dz} v` for a constant 2x2 matrix, returned as `(log_scale, u)`
/// with `|u|_max = 1`.
pub fn expm2_apply(m: [[C; 2]; 2], dz: f64, v: [C; 2]) -> (f64, [C; 2]) {
    let half_tr = (m[0][0] + m[1][1]) * 0.5;
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let mut d = (half_tr * half_tr - det).sqrt();
    let mut w = d * dz;
    if w.re < 0.0 {
        d = -d;
        w = -w;
    }
    let shifted = [[m[0][0] - half_tr, m[0][1]], [m[1][0], m[1][1] - half_tr]];
    let (expo, c, s) = if w.norm() < 1e-4 {
        let w2 = w * w;
        let ch = 1.0 + w2 * (0.5 + w2 / 24.0);
        let sh = 1.0 + w2 * (1.0 / 6.0 + w2 / 120.0);
        (half_tr * dz, ch, sh * dz)
    } else {
        let e2 = (-2.0 * w).exp();
        ((half_tr * dz) + w, (1.0 + e2) * 0.5, (1.0 - e2) / (2.0 * d))
    };
    let mut u = [
        v[0] * c + (shifted[0][0] * v[0] + shifted[0][1] * v[1]) * s,
        v[1] * c + (shifted[1][0] * v[0] + shifted[1][1] * v[1]) * s,
    ];
    let phase = C::new(0.0, expo.im).exp();
    let n = u[0].norm().max(u[1].norm());
    let mut log_scale = expo.re;
    if n > 0.0 {
        u = [u[0] * phase / n, u[1] * phase / n];
        log_scale += n.ln();
    }
    (log_scale, u)
}

struct Ctx<'a> {
    op: &'a dyn Coefficients,
    lambda: C,
    rate: C,
    opts: ModeOptions,
}

impl Ctx<'_> {
    fn constant_matrix(&self, limit: (f64, f64)) -> [[C; 2]; 2] {
        let (z0, z1) = limit;
        [[-self.rate, C::new(1.0, 0.0)], [self.lambda - z0, -self.rate - z1]]
    }

    /// Integrate from `(x0, s0, z0)` through `targets` (indices into the
    /// output arrays, ordered along the sweep) and finally to `x_end`.
    #[allow(clippy::too_many_arguments)]
    fn sweep(
        &self,
        x0: f64,
        s0: f64,
        z0: [C; 2],
        targets: &[usize],
        nodes: &[f64],
        x_end: f64,
        out: &mut [(f64, [C; 2])],
        stats: &mut StepStats,
    ) -> Result<(f64, [C; 2]), ModeError> {
        if x_end == x0 {
            for &i in targets {
                out[i] = (s0, z0);
            }
            return Ok((s0, z0));
        }
        let forward = x_end > x0;
        let mut stops: Vec<(f64, Option<usize>)> = targets.iter().map(|&i| (nodes[i], Some(i))).collect();
        for &b in self.op.breakpoints() {
            let inside = if forward { b > x0 && b < x_end } else { b < x0 && b > x_end };
            if inside {
                stops.push((b, None));
            }
        }
        stops.push((x_end, None));
        if forward {
            stops.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        } else {
            stops.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
        }
        let xs: Vec<f64> = stops.iter().map(|s| s.0).collect();
        let solver = Dopri5 { h_max: self.opts.h_max, ..Dopri5::new(self.opts.rtol) };
        let (lambda, rate, op) = (self.lambda, self.rate, self.op);
        let rhs = |x: f64, z: &[C; 2]| {
            let z0 = op.zeta0(x);
            let z1 = op.zeta1(x);
            [z[1] - rate * z[0], (lambda - z0) * z[0] - (rate + z1) * z[1]]
        };
        let mut end = (s0, z0);
        let n_stops = xs.len();
        let st = solver.integrate(rhs, x0, z0, &xs, |k, _x, s, z| {
            if let Some(i) = stops[k].1 {
                out[i] = (s + s0, *z);
            }
            if k + 1 == n_stops {
                end = (s + s0, *z);
            }
        })?;
        stats.accepted += st.accepted;
        stats.rejected += st.rejected;
        stats.evaluations += st.evaluations;
        Ok(end)
    }

    fn continue_exact(&self, limit: (f64, f64), x0: f64, s0: f64, z0: [C; 2], x: f64) -> (f64, [C; 2]) {
        let (s, z) = expm2_apply(self.constant_matrix(limit), x - x0, z0);
        (s + s0, z)
    }
}

/// Solve one mode at the given ascending output nodes.
pub fn solve_mode(
    op: &dyn Coefficients,
    kind: ModeKind,
    point: &SpectralPoint,
    nodes: &[f64],
    opts: &ModeOptions,
) -> Result<ModeSolution, ModeError> {
    if nodes.iter().any(|x| !x.is_finite()) || nodes.windows(2).any(|w| w[1] < w[0]) {
        return Err(ModeError::BadNodes);
    }
    let lambda = point.lambda;
    let (xl, xr) = (op.left_edge(), op.right_edge());
    let rate = match kind {
        ModeKind::PhiPlus => op.right_rates(lambda)?.1,
        ModeKind::PsiPlus => {
            let r = op.right_rates(lambda)?.0;
            if 2.0 * r.re >= op.decay_alpha() {
                return Err(ModeError::PsiPlusUndefined { two_re_sqrt: 2.0 * r.re, alpha: op.decay_alpha() });
            }
            r
        }
        ModeKind::PhiMinus => op.left_rates(lambda)?.0,
        ModeKind::PsiMinus => op.left_rates(lambda)?.1,
    };
    let ctx = Ctx { op, lambda, rate, opts: *opts };
    let n = nodes.len();
    let mut out = vec![(0.0, [C::new(0.0, 0.0); 2]); n];
    let mut stats = StepStats::default();
    let start = [C::new(1.0, 0.0), rate];
    let below: Vec<usize> = (0..n).filter(|&i| nodes[i] <= xl).collect();
    let above: Vec<usize> = (0..n).filter(|&i| nodes[i] >= xr).collect();
    let inner: Vec<usize> = (0..n).filter(|&i| nodes[i] > xl && nodes[i] < xr).collect();

    match kind {
        ModeKind::PhiPlus | ModeKind::PsiPlus => {
            for &i in &above {
                out[i] = (0.0, start);
            }
            let targets: Vec<usize> = inner.iter().rev().copied().collect();
            // Only sweep as far as the outputs require.
            let end = if below.is_empty() { inner.first().map_or(xr, |&i| nodes[i]) } else { xl };
            let (s_l, z_l) = ctx.sweep(xr, 0.0, start, &targets, nodes, end, &mut out, &mut stats)?;
            for &i in &below {
                out[i] = ctx.continue_exact(op.left_limit(), xl, s_l, z_l, nodes[i]);
            }
        }
        ModeKind::PhiMinus => {
            for &i in &below {
                out[i] = (0.0, start);
            }
            let end = if above.is_empty() { inner.last().map_or(xl, |&i| nodes[i]) } else { xr };
            let (s_r, z_r) = ctx.sweep(xl, 0.0, start, &inner, nodes, end, &mut out, &mut stats)?;
            for &i in &above {
                out[i] = ctx.continue_exact(op.right_limit(), xr, s_r, z_r, nodes[i]);
            }
        }
        ModeKind::PsiMinus => {
            let (mu_p, mu_m) = op.left_rates(lambda)?;
            let gap = mu_p - mu_m;
            if gap.norm() < 1e-12 {
                return Err(ModeError::DegenerateRates(lambda));
            }
            let top = nodes.last().copied().unwrap_or(0.0).max(0.0);
            let xs = top.clamp(xl, xr);
            let down: Vec<usize> = inner.iter().rev().copied().filter(|&i| nodes[i] <= xs).collect();
            let up: Vec<usize> = inner.iter().copied().filter(|&i| nodes[i] > xs).collect();
            let (s_l, z_l) = ctx.sweep(xs, 0.0, start, &down, nodes, xl, &mut out, &mut stats)?;
            let (s_r, z_r) = ctx.sweep(xs, 0.0, start, &up, nodes, xr, &mut out, &mut stats)?;
            for &i in &above {
                out[i] = ctx.continue_exact(op.right_limit(), xr, s_r, z_r, nodes[i]);
            }
            // Split Z(xl) = A (1, mu-) + B (1, mu+) and scale A to one.
            let a = (mu_p * z_l[0] - z_l[1]) / gap;
            let b = (z_l[1] - mu_m * z_l[0]) / gap;
            if a.norm() == 0.0 {
                return Err(ModeError::DegenerateRates(lambda));
            }
            for &i in &below {
                // Z(x) = A (1, mu-) + B e^{(mu+ - mu-)(x - xl)} (1, mu+), exactly.
                let e = ((mu_p - mu_m) * (nodes[i] - xl)).exp() * (b / a);
                out[i] = (s_l, [(1.0 + e) * a, (mu_m + e * mu_p) * a]);
            }
            let ln_a = a.ln();
            let phase = C::new(0.0, -ln_a.im).exp();
            for (s, z) in out.iter_mut() {
                *s -= ln_a.re + s_l;
                *z = [z[0] * phase, z[1] * phase];
            }
        }
    }

    let (log_scale, z): (Vec<f64>, Vec<[C; 2]>) = out.into_iter().unzip();
    Ok(ModeSolution { kind, point: *point, rate, nodes: nodes.to_vec(), log_scale, z, stats })
}

/// `(Lambda_1, Lambda_2) = (kappa_{1,2} - theta_{1,2}) / sqrt(lambda)` at `x`,
/// from psi+ and phi+. Below `|lambda| = 1e-12` the limit is obtained by
/// Richardson extrapolation in `sqrt(lambda)` (the quotient is even in it).
pub fn cancellation_lambda(op: &dyn Coefficients, x: f64, point: &SpectralPoint, opts: &ModeOptions) -> Result<[C; 2], ModeError> {
    let opts = ModeOptions { rtol: opts.rtol.min(1e-12), ..*opts };
    if point.lambda.norm() < 1e-12 {
        let dir = if point.sqrt_lambda.norm() > 0.0 { point.sqrt_lambda / point.sqrt_lambda.norm() } else { C::new(1.0, 0.0) };
        let s1 = dir * 1e-2;
        let a = cancellation_at(op, x, s1, &opts)?;
        let b = cancellation_at(op, x, s1 * 2.0, &opts)?;
        return Ok([(4.0 * a[0] - b[0]) / 3.0, (4.0 * a[1] - b[1]) / 3.0]);
    }
    cancellation_at(op, x, point.sqrt_lambda, &opts)
}

fn cancellation_at(op: &dyn Coefficients, x: f64, s: C, opts: &ModeOptions) -> Result<[C; 2], ModeError> {
    let point = SpectralPoint::at(s * s);
    let phi = solve_mode(op, ModeKind::PhiPlus, &point, &[x], opts)?;
    let psi = solve_mode(op, ModeKind::PsiPlus, &point, &[x], opts)?;
    let (zp, zs) = (phi.envelope(0), psi.envelope(0));
    let s = point.sqrt_lambda;
    Ok([(zs[0] - zp[0]) / s, (zs[1] - zp[1] - 2.0 * s) / s])
}
