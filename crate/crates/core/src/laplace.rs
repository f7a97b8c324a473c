//! Temporal Green's function `G(t, x, y) = (2 pi i)^{-1} int e^{lambda t} G_lambda(x, y) d lambda`
//! along a contour made of a parabola `sqrt(lambda) = rho + i k` near the
//! branch point and two rays `lambda = -delta0 + cos(theta)|l| + i sin(theta) l`.

use std::f64::consts::PI;

use num_complex::Complex64 as C;
use serde::Serialize;
use thiserror::Error;

use crate::green_lambda::Resolvent;
use crate::modes::{ModeError, ModeOptions, SpectralPoint};
use crate::numeric::fit::{fit_line, loglog_slope};
use crate::numeric::quad::{gauss_legendre, GaussKronrod};
use crate::operator::Coefficients;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LaplaceError {
    #[error(transparent)]
    Mode(#[from] ModeError),
    #[error("invalid contour: {0}")]
    InvalidContour(String),
    #[error("contour quadrature did not converge (estimated relative error {0:.2e})")]
    NoConvergence(f64),
    #[error("need at least {0} samples")]
    TooFewSamples(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ContourParams {
    /// Bulk regime: `rho = |x - y| / (L t)`.
    pub l: f64,
    /// Ray angle, in `(pi/2, pi)`.
    pub theta: f64,
    /// Ray vertex `-delta0` in the bulk regime.
    pub delta0: f64,
    pub rho_min: f64,
    /// Regime split `K`: short/fast when `|x - y| >= K t` or `t < 1`.
    pub k_split: f64,
    /// Fast regime: `rho = eta |x - y| / (2 t)`.
    pub eta: f64,
    /// Relative tolerance of the adaptive segment quadrature.
    pub rel_tol: f64,
}

impl ContourParams {
    pub fn for_speed(c_star: f64) -> Self {
        Self {
            l: 4.0,
            theta: 5.0 * PI / 6.0,
            delta0: 0.05,
            rho_min: 0.05,
            k_split: 4.0 * c_star.max(1.0),
            eta: 1.0,
            rel_tol: 1e-10,
        }
    }

    /// Same parameters with the ray angle tilted, if needed, so that rays
    /// from `-delta0` and from `0` stay right of the rightmost curve of the
    /// essential spectrum from `-infinity`, with a quarter of the available
    /// gap to spare. Left of that curve `G_lambda` is an analytic
    /// continuation that grows like `e^{|Re mu+| |x - y|}`, which ruins
    /// sums over widely separated nodes.
    pub fn clear_of_left_curve(&self, op: &dyn Coefficients) -> Self {
        let (z0, z1) = op.left_limit();
        let gap = -z0 - self.delta0;
        if z1 == 0.0 || gap <= 0.0 {
            return *self;
        }
        // min over the ray of (ray - curve) = gap - z1^2 cot^2(theta) / 4.
        let cot_max = (4.0 * 0.75 * gap).sqrt() / z1.abs();
        let theta_max = PI / 2.0 + cot_max.atan();
        Self { theta: self.theta.min(theta_max), ..*self }
    }

    fn validate(&self) -> Result<(), LaplaceError> {
        let bad = |m: &str| Err(LaplaceError::InvalidContour(m.to_string()));
        if !(self.theta > PI / 2.0 && self.theta < PI) {
            return bad("theta must lie in (pi/2, pi)");
        }
        if !(self.l > 0.0 && self.rho_min > 0.0 && self.k_split > 0.0 && self.eta > 0.0) {
            return bad("L, rho_min, K and eta must be positive");
        }
        if !(self.delta0 >= 0.0 && self.delta0.is_finite()) {
            return bad("delta0 must be finite and non-negative");
        }
        if !(self.rel_tol > 0.0) {
            return bad("rel_tol must be positive");
        }
        Ok(())
    }
}

impl Default for ContourParams {
    fn default() -> Self {
        Self::for_speed(2.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum TimeRegime {
    /// `|x - y| >= K t` or `t < 1`.
    ShortOrFast,
    /// `|x - y| < K t` and `t >= 1`.
    Bulk,
}

impl TimeRegime {
    pub fn of(t: f64, d: f64, k_split: f64) -> Self {
        if d >= k_split * t || t < 1.0 {
            TimeRegime::ShortOrFast
        } else {
            TimeRegime::Bulk
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum Segment {
    /// `sqrt(lambda) = rho + i k`, `k` in `[k_lo, k_hi]`.
    Parabola { rho: f64, k_lo: f64, k_hi: f64 },
    /// `lambda = -delta0 + cos(theta)|l| + i sin(theta) l`, `l` in `[l_lo, l_hi]`
    /// (either end may be infinite).
    Ray { delta0: f64, theta: f64, l_lo: f64, l_hi: f64 },
}

impl Segment {
    /// `(lambda, d lambda / d s)` at parameter `s`.
    pub fn at(&self, s: f64) -> (C, C) {
        match *self {
            Segment::Parabola { rho, .. } => {
                let r = C::new(rho, s);
                (r * r, 2.0 * C::i() * r)
            }
            Segment::Ray { delta0, theta, .. } => {
                let (sn, cs) = theta.sin_cos();
                let lambda = C::new(-delta0 + cs * s.abs(), sn * s);
                (lambda, C::new(cs * s.signum(), sn))
            }
        }
    }

    pub fn range(&self) -> (f64, f64) {
        match *self {
            Segment::Parabola { k_lo, k_hi, .. } => (k_lo, k_hi),
            Segment::Ray { l_lo, l_hi, .. } => (l_lo, l_hi),
        }
    }
}

/// An upward-oriented contour symmetric about the real axis.
#[derive(Clone, Debug, Serialize)]
pub struct ContourSpec {
    pub regime: TimeRegime,
    pub rho: f64,
    pub delta0: f64,
    pub theta: f64,
    /// Parabola half-length: the parabola meets the rays at `k = +-k_star`.
    pub k_star: f64,
    /// Ray parameter at the junction.
    pub l_star: f64,
    /// Lower ray, parabola, upper ray.
    pub segments: Vec<Segment>,
    /// Smallest signed distance of the sampled contour to the right of the
    /// essential-spectrum curve from `-infinity` (negative when the rays
    /// pass to its left; the kernel is then its analytic continuation).
    pub left_curve_margin: f64,
}

impl ContourSpec {
    /// Parabola `sqrt(lambda) = rho + i k` joined to rays with vertex
    /// `-delta0` at `k = +-k_star`.
    pub fn from_geometry(regime: TimeRegime, rho: f64, delta0: f64, theta: f64) -> Self {
        let (sn, cs) = theta.sin_cos();
        let cot = cs / sn;
        let csc = 1.0 / sn;
        let k_star = -rho * cot + (rho * rho * csc * csc + delta0).sqrt();
        let l_star = 2.0 * rho * k_star / sn;
        let segments = vec![
            Segment::Ray { delta0, theta, l_lo: f64::NEG_INFINITY, l_hi: -l_star },
            Segment::Parabola { rho, k_lo: -k_star, k_hi: k_star },
            Segment::Ray { delta0, theta, l_lo: l_star, l_hi: f64::INFINITY },
        ];
        Self { regime, rho, delta0, theta, k_star, l_star, segments, left_curve_margin: f64::INFINITY }
    }

    /// Largest gap between consecutive segment endpoints.
    pub fn junction_mismatch(&self) -> f64 {
        self.segments
            .windows(2)
            .map(|w| (w[0].at(w[0].range().1).0 - w[1].at(w[1].range().0).0).norm())
            .fold(0.0, f64::max)
    }

    fn measure_left_curve(&mut self, op: &dyn Coefficients) {
        let mut margin = f64::INFINITY;
        for seg in &self.segments {
            let (a, b) = seg.range();
            let (a, b) = (a.max(-2000.0), b.min(2000.0));
            for i in 0..=400 {
                let s = a + (b - a) * i as f64 / 400.0;
                margin = margin.min(op.left_curve_distance(seg.at(s).0));
            }
        }
        self.left_curve_margin = margin;
    }
}

/// Contour for `G(t, x, y)`: in the bulk regime `rho = max(|x - y| / (L t), rho_min)`
/// with rays at vertex `-delta0`; in the short/fast regime the parabola passes
/// through the saddle `rho = max(eta |x - y| / (2 t), rho_min)` and the rays
/// start at the origin.
pub fn build_contour(
    op: &dyn Coefficients,
    t: f64,
    x: f64,
    y: f64,
    params: &ContourParams,
) -> Result<ContourSpec, LaplaceError> {
    params.validate()?;
    if !(t > 0.0 && t.is_finite() && x.is_finite() && y.is_finite()) {
        return Err(LaplaceError::InvalidContour(format!("need t > 0 and finite x, y (t = {t})")));
    }
    let d = (x - y).abs();
    let regime = TimeRegime::of(t, d, params.k_split);
    let (rho, delta0) = match regime {
        TimeRegime::Bulk => ((d / (params.l * t)).max(params.rho_min), params.delta0),
        TimeRegime::ShortOrFast => ((params.eta * d / (2.0 * t)).max(params.rho_min), 0.0),
    };
    let mut spec = ContourSpec::from_geometry(regime, rho, delta0, params.theta);
    let gap = spec.junction_mismatch();
    if gap > 1e-10 * (1.0 + spec.l_star) {
        return Err(LaplaceError::InvalidContour(format!("segments do not join (gap {gap:.2e})")));
    }
    spec.measure_left_curve(op);
    Ok(spec)
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct GreenTimeSample {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub value: f64,
    /// Imaginary part left over by the full-contour quadrature.
    pub imag: f64,
    pub error_estimate: f64,
    pub regime: TimeRegime,
    pub evaluations: usize,
}

/// Result of integrating `e^{lambda t} F(lambda) d lambda / (2 pi i)` over a contour.
#[derive(Clone, Copy, Debug)]
pub struct ContourIntegral {
    pub value: C,
    pub error: f64,
    pub evaluations: usize,
}

/// Adaptive Gauss-Kronrod quadrature of `e^{lambda t} F(lambda) / (2 pi i)`
/// over every segment. Rays are integrated in chunks of `8 / (|cos theta| t)`
/// until a chunk adds less than `1e-16` of the running total.
pub fn integrate_contour<F>(spec: &ContourSpec, t: f64, rel_tol: f64, mut kernel: F) -> Result<ContourIntegral, LaplaceError>
where
    F: FnMut(C) -> Result<C, ModeError>,
{
    let mut failure: Option<ModeError> = None;
    let mut integrand = |seg: &Segment, s: f64| -> C {
        if failure.is_some() {
            return C::new(0.0, 0.0);
        }
        let (lambda, dl) = seg.at(s);
        match kernel(lambda) {
            Ok(g) => (lambda * t).exp() * g * dl,
            Err(e) => {
                failure = Some(e);
                C::new(0.0, 0.0)
            }
        }
    };
    let gk = GaussKronrod::new(rel_tol, 0.0);
    let mut total = C::new(0.0, 0.0);
    let mut error = 0.0;
    let mut evaluations = 0;
    let mut converged = true;
    // The parabola first so the running total is meaningful for the rays.
    let order = [1usize, 0, 2];
    for &si in order.iter().filter(|&&i| i < spec.segments.len()) {
        let seg = spec.segments[si];
        let (a, b) = seg.range();
        if a.is_finite() && b.is_finite() {
            let r = gk.integrate(|s| integrand(&seg, s), a, b);
            total += r.value;
            error += r.error;
            evaluations += r.evaluations;
            converged &= r.converged;
            continue;
        }
        let theta = match seg {
            Segment::Ray { theta, .. } => theta,
            Segment::Parabola { .. } => unreachable!("parabolas are finite"),
        };
        let width = 8.0 / (theta.cos().abs() * t);
        let outward = b.is_infinite();
        let mut start = if outward { a } else { b };
        for _ in 0..200 {
            let end = if outward { start + width } else { start - width };
            let floor = 1e-14 * total.norm();
            let gk = GaussKronrod::new(rel_tol, floor);
            let r = gk.integrate(|s| integrand(&seg, s), start.min(end), start.max(end));
            let v = r.value;
            total += v;
            error += r.error;
            evaluations += r.evaluations;
            converged &= r.converged;
            start = end;
            if v.norm() <= 1e-16 * total.norm() || total.norm() == 0.0 && v.norm() == 0.0 {
                break;
            }
        }
    }
    if let Some(e) = failure {
        return Err(e.into());
    }
    let value = total / (2.0 * PI * C::i());
    let error = error / (2.0 * PI);
    if !converged && error > 1e-6 * value.norm() {
        return Err(LaplaceError::NoConvergence(error / value.norm()));
    }
    Ok(ContourIntegral { value, error, evaluations })
}

/// `G(t, x, y)` by adaptive quadrature of the resolvent kernel along `spec`.
pub fn green_time(
    op: &dyn Coefficients,
    t: f64,
    x: f64,
    y: f64,
    spec: &ContourSpec,
    rel_tol: f64,
    opts: &ModeOptions,
) -> Result<GreenTimeSample, LaplaceError> {
    let (nodes, i, j) = if x <= y { ([x, y], 0, 1) } else { ([y, x], 1, 0) };
    let r = integrate_contour(spec, t, rel_tol, |lambda| {
        let res = Resolvent::new(op, SpectralPoint::at(lambda), &nodes, opts)?;
        Ok(res.green(i, j))
    })?;
    if r.error > 1e-6 * r.value.re.abs() && r.error > 1e-300 {
        return Err(LaplaceError::NoConvergence(r.error / r.value.re.abs()));
    }
    Ok(GreenTimeSample {
        t,
        x,
        y,
        value: r.value.re,
        imag: r.value.im,
        error_estimate: r.error,
        regime: spec.regime,
        evaluations: r.evaluations,
    })
}

/// Quadrature nodes on the upper half of a contour, valid for every time in
/// `[s_lo, s_hi]` and separations up to `d_max`. Conjugate symmetry gives
/// `G(s) = Im(sum_k w_k e^{lambda_k s} G_{lambda_k}) / pi`.
#[derive(Clone, Debug, Serialize)]
pub struct ContourRule {
    pub lambdas: Vec<C>,
    pub weights: Vec<C>,
    pub s_lo: f64,
    pub s_hi: f64,
}

impl ContourRule {
    /// Composite 16-point Gauss-Legendre panels. Panel widths follow the
    /// oscillation of `e^{lambda s}` and `e^{-sqrt(lambda) d}`, the decay of
    /// `e^{lambda s}` along the ray and the distance to the branch point;
    /// `refine < 1` shrinks all of them. The ray is cut where
    /// `e^{Re(lambda) s_lo}` has fallen by `e^{-40}`.
    pub fn new(spec: &ContourSpec, s_lo: f64, s_hi: f64, d_max: f64, refine: f64) -> Self {
        assert!(s_lo > 0.0 && s_hi >= s_lo && refine > 0.0);
        let (gx, gw) = gauss_legendre::<f64>(16);
        let mut lambdas = Vec::new();
        let mut weights = Vec::new();
        let mut push_panel = |seg: &Segment, a: f64, b: f64| {
            let half = 0.5 * (b - a);
            for (x, w) in gx.iter().zip(&gw) {
                let (l, dl) = seg.at(a + half * (x + 1.0));
                lambdas.push(l);
                weights.push(dl * (w * half));
            }
        };
        let rho = spec.rho;
        let par = Segment::Parabola { rho, k_lo: 0.0, k_hi: spec.k_star };
        let wk = refine * (1.0 / s_hi.sqrt()).min(2.0 * PI / (2.0 * rho * s_hi + d_max + 1.0)).min(0.5);
        let n = (spec.k_star / wk).ceil().max(1.0) as usize;
        for i in 0..n {
            push_panel(&par, spec.k_star * i as f64 / n as f64, spec.k_star * (i + 1) as f64 / n as f64);
        }
        let theta = spec.theta;
        let (sn, cs) = theta.sin_cos();
        let ray = Segment::Ray { delta0: spec.delta0, theta, l_lo: spec.l_star, l_hi: f64::INFINITY };
        let l_end = spec.l_star + 40.0 / (cs.abs() * s_lo);
        let mut l = spec.l_star;
        while l < l_end {
            let lam = ray.at(l).0;
            let root = lam.sqrt();
            let d_eff = d_max.min(40.0 / root.re.max(1e-12));
            let freq = sn * s_hi + d_eff / (2.0 * lam.norm().sqrt());
            let w = refine * (2.0 * PI / freq).min(3.0 / (cs.abs() * s_hi)).min(0.5 * lam.norm() + 0.05);
            let b = (l + w).min(l_end);
            push_panel(&ray, l, b);
            l = b;
        }
        Self { lambdas, weights, s_lo, s_hi }
    }

    pub fn len(&self) -> usize {
        self.lambdas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambdas.is_empty()
    }

    /// `G(s)` from kernel values `g[k] = G_{lambda_k}`.
    pub fn apply(&self, s: f64, g: &[C]) -> f64 {
        let sum: C = self.lambdas.iter().zip(&self.weights).zip(g).map(|((l, w), v)| w * (l * s).exp() * v).sum();
        sum.im / PI
    }

    /// `e^{lambda_k s} w_k / pi`: multiply by `G_{lambda_k}`, sum and take
    /// the imaginary part.
    pub fn time_weights(&self, s: f64) -> Vec<C> {
        self.lambdas.iter().zip(&self.weights).map(|(l, w)| w * (l * s).exp() / PI).collect()
    }
}

/// `G(t, x_i, x_j)` for all node pairs with `|x_i - x_j| <= width`, from one
/// shared contour with `rho = max(width / (L t), rho_min)`. Returns
/// `(i, j, value)` triples.
pub fn green_time_near_diagonal(
    op: &dyn Coefficients,
    t: f64,
    nodes: &[f64],
    width: f64,
    params: &ContourParams,
    opts: &ModeOptions,
) -> Result<Vec<(usize, usize, f64)>, LaplaceError> {
    let rho = (width / (params.l * t)).max(params.rho_min);
    let spec = ContourSpec::from_geometry(TimeRegime::of(t, width, params.k_split), rho, params.delta0, params.theta);
    let rule = ContourRule::new(&spec, t, t, width, 1.0);
    let pairs: Vec<(usize, usize)> = (0..nodes.len())
        .flat_map(|i| (0..nodes.len()).filter(move |&j| (nodes[i] - nodes[j]).abs() <= width).map(move |j| (i, j)))
        .collect();
    let tw = rule.time_weights(t);
    let mut acc = vec![C::new(0.0, 0.0); pairs.len()];
    for (k, &lambda) in rule.lambdas.iter().enumerate() {
        let res = Resolvent::new(op, SpectralPoint::at(lambda), nodes, opts)?;
        for (a, &(i, j)) in acc.iter_mut().zip(&pairs) {
            *a += tw[k] * res.green(i, j);
        }
    }
    Ok(pairs.into_iter().zip(acc).map(|((i, j), a)| (i, j, a.im)).collect())
}

#[derive(Clone, Debug, Serialize)]
pub struct DecaySeries {
    pub t: Vec<f64>,
    pub sup: Vec<f64>,
    pub slope: f64,
}

/// `sup_{|x - y| <= width} |G(t, x, y)|` over `nodes` at each time, with the
/// log-log slope of the series.
pub fn near_diagonal_decay(
    op: &dyn Coefficients,
    times: &[f64],
    nodes: &[f64],
    width: f64,
    params: &ContourParams,
    opts: &ModeOptions,
) -> Result<DecaySeries, LaplaceError> {
    if times.len() < 2 {
        return Err(LaplaceError::TooFewSamples(2));
    }
    let mut sup = Vec::with_capacity(times.len());
    for &t in times {
        let vals = green_time_near_diagonal(op, t, nodes, width, params, opts)?;
        sup.push(vals.iter().fold(0.0f64, |m, v| m.max(v.2.abs())));
    }
    let slope = loglog_slope(times, &sup).map_or(f64::NAN, |f| f.slope);
    Ok(DecaySeries { t: times.to_vec(), sup, slope })
}

/// `G(t, x_i, x_j)` for every node `x_i` and one source node `x_j`, from a
/// single contour rule with the rays tilted clear of the left essential
/// spectrum.
pub fn green_time_column(
    op: &dyn Coefficients,
    t: f64,
    nodes: &[f64],
    j: usize,
    params: &ContourParams,
    opts: &ModeOptions,
) -> Result<Vec<f64>, LaplaceError> {
    let params = params.clear_of_left_curve(op);
    let d_max = nodes.last().copied().unwrap_or(0.0) - nodes.first().copied().unwrap_or(0.0);
    let spec = ContourSpec::from_geometry(TimeRegime::of(t, 0.0, params.k_split), params.rho_min, params.delta0, params.theta);
    let rule = ContourRule::new(&spec, t, t, d_max, 1.0);
    let tw = rule.time_weights(t);
    let mut acc = vec![C::new(0.0, 0.0); nodes.len()];
    for (k, &lambda) in rule.lambdas.iter().enumerate() {
        let res = Resolvent::new(op, SpectralPoint::at(lambda), nodes, opts)?;
        for (i, a) in acc.iter_mut().enumerate() {
            *a += tw[k] * res.green(i, j);
        }
    }
    Ok(acc.into_iter().map(|a| a.im).collect())
}

/// `u(x_i) = int G(t, x_i, y) h(y) dy` with `h` sampled on the ascending
/// `nodes` (trapezoid weights), computed for every node at once. The rays
/// are tilted clear of the left essential spectrum.
pub fn convolve_green(
    op: &dyn Coefficients,
    t: f64,
    nodes: &[f64],
    h: &[f64],
    params: &ContourParams,
    opts: &ModeOptions,
) -> Result<Vec<f64>, LaplaceError> {
    let n = nodes.len();
    assert_eq!(h.len(), n);
    let params = &params.clear_of_left_curve(op);
    let c = trapezoid_weighted(nodes, h);
    let d_max = nodes.last().copied().unwrap_or(0.0) - nodes.first().copied().unwrap_or(0.0);
    let spec = ContourSpec::from_geometry(TimeRegime::of(t, 0.0, params.k_split), params.rho_min, params.delta0, params.theta);
    let rule = ContourRule::new(&spec, t, t, d_max, 1.0);
    let tw = rule.time_weights(t);
    let mut acc = vec![C::new(0.0, 0.0); n];
    for (k, &lambda) in rule.lambdas.iter().enumerate() {
        let res = Resolvent::new(op, SpectralPoint::at(lambda), nodes, opts)?;
        for (a, u) in acc.iter_mut().zip(res.apply(&c)) {
            *a += tw[k] * u;
        }
    }
    Ok(acc.into_iter().map(|a| a.im).collect())
}

/// Trapezoid-weighted samples `h_j w_j` as complex numbers.
pub fn trapezoid_weighted(nodes: &[f64], h: &[f64]) -> Vec<C> {
    let n = nodes.len();
    (0..n)
        .map(|j| {
            let left = if j > 0 { nodes[j] - nodes[j - 1] } else { 0.0 };
            let right = if j + 1 < n { nodes[j + 1] - nodes[j] } else { 0.0 };
            C::new(h[j] * 0.5 * (left + right), 0.0)
        })
        .collect()
}

/// Fitted constants of the time-domain envelopes on a sample set.
#[derive(Clone, Debug, Serialize)]
pub struct TimeBoundFit {
    pub regime: TimeRegime,
    /// Fitted Gaussian width `kappa` in `e^{-|x-y|^2 / (kappa t)}`.
    pub kappa: f64,
    /// Exponential rate `r` of the `C e^{-r t}` remainder (bulk only).
    pub r: f64,
    /// `sup |G| / envelope`.
    pub c: f64,
    pub samples: usize,
}

/// Sample `G(t, x, y)` on the grid with the adaptive contour quadrature,
/// split by regime, fit `kappa` per regime from `log|G|` against
/// `|x - y|^2 / t` and report `sup |G| / envelope` with
/// `t^{-1/2} e^{-d^2/(kappa t)}` (short/fast) and
/// `(1 + d) t^{-3/2} e^{-d^2/(kappa t)} + e^{-r t}` (bulk, `r = delta0`).
pub fn verify_time_bounds(
    op: &dyn Coefficients,
    times: &[f64],
    pairs: &[(f64, f64)],
    params: &ContourParams,
    opts: &ModeOptions,
) -> Result<Vec<TimeBoundFit>, LaplaceError> {
    let mut samples: Vec<(TimeRegime, f64, f64, f64)> = Vec::new();
    for &t in times {
        for &(x, y) in pairs {
            let spec = build_contour(op, t, x, y, params)?;
            let g = green_time(op, t, x, y, &spec, params.rel_tol, opts)?;
            samples.push((spec.regime, t, (x - y).abs(), g.value.abs()));
        }
    }
    let mut out = Vec::new();
    for regime in [TimeRegime::ShortOrFast, TimeRegime::Bulk] {
        let s: Vec<&(TimeRegime, f64, f64, f64)> = samples.iter().filter(|v| v.0 == regime && v.3 > 0.0).collect();
        if s.is_empty() {
            continue;
        }
        let u: Vec<f64> = s.iter().map(|v| v.2 * v.2 / v.1).collect();
        let w: Vec<f64> = s
            .iter()
            .map(|v| match regime {
                TimeRegime::ShortOrFast => (v.3 * v.1.sqrt()).ln(),
                TimeRegime::Bulk => (v.3 * v.1.powf(1.5) / (1.0 + v.2)).ln(),
            })
            .collect();
        let kappa = match fit_line(&u, &w) {
            Some(f) if f.slope < 0.0 => -1.0 / f.slope,
            _ => f64::INFINITY,
        };
        let r = params.delta0;
        let c = s
            .iter()
            .map(|v| {
                let (t, d, g) = (v.1, v.2, v.3);
                let gauss = if kappa.is_finite() { (-d * d / (kappa * t)).exp() } else { 1.0 };
                let env = match regime {
                    TimeRegime::ShortOrFast => gauss / t.sqrt(),
                    TimeRegime::Bulk => (1.0 + d) * gauss / t.powf(1.5) + (-r * t).exp(),
                };
                g / env
            })
            .fold(0.0f64, f64::max);
        out.push(TimeBoundFit { regime, kappa, r, c, samples: s.len() });
    }
    Ok(out)
}
