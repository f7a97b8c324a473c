//! Critical traveling front `q'' + c* q' + f(q) = 0`, `q(-inf) = 1`,
//! `q(+inf) = 0`, normalized by `q(0) = 1/2`.
//!
//! Solved by Newton's method on a centered finite-difference grid. The left
//! end carries the Robin condition `q' = -r (1 - q)` of the decaying mode at
//! `q = 1`; the phase row replaces a right boundary condition.

use serde::Serialize;
use thiserror::Error;

use crate::model::{ModelParams, Nonlinearity};
use crate::numeric::linalg::{least_squares, solve_tridiagonal, LinalgError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FrontError {
    #[error("domain [{left}, {right}] too short: need right end > {need}")]
    DomainTooShort { left: f64, right: f64, need: f64 },
    #[error("invalid grid step {0}")]
    BadStep(f64),
    #[error("Newton iteration did not converge (residual {residual:e} after {iterations} steps)")]
    NoConvergence { residual: f64, iterations: usize },
    #[error("profile not monotone near x = {x}")]
    NotMonotone { x: f64 },
    #[error("tail fit error {fit_err:e} above threshold {threshold:e} on window [{lo}, {hi}]")]
    PoorTailFit { fit_err: f64, threshold: f64, lo: f64, hi: f64 },
    #[error("tail window [{lo}, {hi}] not inside the profile")]
    BadWindow { lo: f64, hi: f64 },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Coefficients of the right tail `q ~ (a + b x) e^{-gamma* x}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TailFit {
    pub a: f64,
    pub b: f64,
    /// Largest relative residual of the fit on its window.
    pub fit_err: f64,
    /// Decay rate used in the basis (the discrete rate for grid profiles).
    pub gamma: f64,
    /// Half-splitting of the double root (zero for continuous samples).
    pub split: f64,
    pub window: (f64, f64),
}

impl TailFit {
    pub fn eval(&self, x: f64) -> f64 {
        (-self.gamma * x).exp() * (self.a * (self.split * x).cosh() + self.b * shc(self.split, x))
    }

    pub fn deriv(&self, x: f64) -> f64 {
        let e = (-self.gamma * x).exp();
        let s = self.split;
        let c = (s * x).cosh();
        let sh = shc(s, x);
        // d/dx sinh(s x)/s = cosh(s x), d/dx cosh(s x) = s^2 sinh(s x)/s
        e * (-self.gamma * (self.a * c + self.b * sh) + self.a * s * s * sh + self.b * c)
    }
}

/// `sinh(s x) / s`, equal to `x` at `s = 0`.
fn shc(s: f64, x: f64) -> f64 {
    if s == 0.0 {
        x
    } else {
        (s * x).sinh() / s
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct FrontProfile {
    /// First node; nodes are `x0 + i h`, with `x = 0` a node.
    pub x0: f64,
    pub h: f64,
    pub q: Vec<f64>,
    pub dq: Vec<f64>,
    pub c_star: f64,
    pub gamma_star: f64,
    /// Rate of `1 - q ~ e^{r x}` at `-infinity`.
    pub left_rate: f64,
    pub tail: TailFit,
    /// Max-norm of the discrete equation residual.
    pub residual: f64,
    pub iterations: usize,
}

impl FrontProfile {
    pub fn len(&self) -> usize {
        self.q.len()
    }

    pub fn is_empty(&self) -> bool {
        self.q.is_empty()
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x0 + i as f64 * self.h
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.x(i)).collect()
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.x0, self.x(self.len() - 1))
    }

    /// Cubic Hermite interpolant of the profile, continued by the tails.
    pub fn q_at(&self, x: f64) -> f64 {
        self.eval(x).0
    }

    pub fn dq_at(&self, x: f64) -> f64 {
        self.eval(x).1
    }

    /// `(q, q')` at any `x`.
    pub fn eval(&self, x: f64) -> (f64, f64) {
        let (left, right) = self.domain();
        if x < left {
            let g = (1.0 - self.q[0]) * (self.left_rate * (x - left)).exp();
            return (1.0 - g, self.dq[0] * (self.left_rate * (x - left)).exp());
        }
        if x > right {
            return (self.tail.eval(x), self.tail.deriv(x));
        }
        let s = (x - self.x0) / self.h;
        let i = (s.floor() as usize).min(self.len() - 2);
        let t = s - i as f64;
        let (q0, q1) = (self.q[i], self.q[i + 1]);
        let (d0, d1) = (self.dq[i] * self.h, self.dq[i + 1] * self.h);
        let t2 = t * t;
        let t3 = t2 * t;
        let q = (2.0 * t3 - 3.0 * t2 + 1.0) * q0 + (t3 - 2.0 * t2 + t) * d0 + (-2.0 * t3 + 3.0 * t2) * q1 + (t3 - t2) * d1;
        let dq = ((6.0 * t2 - 6.0 * t) * q0 + (3.0 * t2 - 4.0 * t + 1.0) * d0 + (-6.0 * t2 + 6.0 * t) * q1 + (3.0 * t2 - 2.0 * t) * d1)
            / self.h;
        (q, dq)
    }
}

#[derive(Clone, Copy, Debug)]
pub struct FrontSolver {
    /// Width of the logistic initial guess `1 / (1 + e^{x / w})`.
    pub initial_width: f64,
    pub tol: f64,
    pub max_iter: usize,
    /// Largest accepted relative tail-fit error.
    pub fit_threshold: f64,
}

impl Default for FrontSolver {
    fn default() -> Self {
        Self { initial_width: 1.0, tol: 1e-11, max_iter: 60, fit_threshold: 1e-3 }
    }
}

/// Solve for the critical front with default solver settings.
pub fn solve_front(
    nl: &Nonlinearity<f64>,
    m: &ModelParams<f64>,
    x_minus: f64,
    x_plus: f64,
    h: f64,
) -> Result<FrontProfile, FrontError> {
    FrontSolver::default().solve(nl, m, x_minus, x_plus, h)
}

impl FrontSolver {
    pub fn solve(
        &self,
        nl: &Nonlinearity<f64>,
        m: &ModelParams<f64>,
        x_minus: f64,
        x_plus: f64,
        h: f64,
    ) -> Result<FrontProfile, FrontError> {
        if !(h > 0.0 && h < 1.0) {
            return Err(FrontError::BadStep(h));
        }
        let need = 20.0 / m.gamma_star;
        if !(x_plus > need) || !(x_minus < -5.0) {
            return Err(FrontError::DomainTooShort { left: x_minus, right: x_plus, need });
        }
        let i_lo = (x_minus / h).ceil() as i64;
        let i_hi = (x_plus / h).floor() as i64;
        let n = (i_hi - i_lo + 1) as usize;
        let x0 = i_lo as f64 * h;
        let i0 = (-i_lo) as usize;
        let c = m.c_star;
        let r = -0.5 * c + (0.25 * c * c - m.f1at1).sqrt();
        let xs: Vec<f64> = (0..n).map(|i| x0 + i as f64 * h).collect();

        let mut q: Vec<f64> = xs.iter().map(|x| 1.0 / (1.0 + (x / self.initial_width).exp())).collect();
        q[i0] = 0.5;

        let hi2 = 1.0 / (h * h);
        let ch = c / (2.0 * h);
        let (lo_c, up_c) = (hi2 - ch, hi2 + ch);
        let residual_of = |q: &[f64], out: &mut [f64]| {
            out[0] = (q[1] - q[0]) / h + r * (1.0 - 0.5 * (q[0] + q[1]));
            for i in 1..n - 1 {
                out[i] = lo_c * q[i - 1] - 2.0 * hi2 * q[i] + up_c * q[i + 1] + nl.f(q[i]);
            }
            out[n - 1] = q[i0] - 0.5;
        };
        let norm = |v: &[f64]| v.iter().fold(0.0f64, |s, x| s.max(x.abs()));

        let mut res = vec![0.0; n];
        residual_of(&q, &mut res);
        let mut rnorm = norm(&res);
        let mut iterations = 0;
        while rnorm > self.tol {
            if iterations >= self.max_iter {
                return Err(FrontError::NoConvergence { residual: rnorm, iterations });
            }
            iterations += 1;
            let delta = self.newton_direction(&q, &res, nl, h, r, i0, lo_c, up_c)?;
            // Backtracking on the residual norm keeps far-off guesses on track.
            let mut step = 1.0;
            let mut trial = vec![0.0; n];
            let mut tres = vec![0.0; n];
            loop {
                for i in 0..n {
                    trial[i] = q[i] + step * delta[i];
                }
                residual_of(&trial, &mut tres);
                let tn = norm(&tres);
                if tn.is_finite() && (tn < rnorm || step < 1e-3) {
                    q.copy_from_slice(&trial);
                    res.copy_from_slice(&tres);
                    rnorm = tn;
                    break;
                }
                step *= 0.5;
            }
        }

        for i in 1..n {
            if q[i] > q[i - 1] + 1e-14 {
                return Err(FrontError::NotMonotone { x: xs[i] });
            }
        }
        let mut dq = vec![0.0; n];
        for i in 1..n - 1 {
            dq[i] = (q[i + 1] - q[i - 1]) / (2.0 * h);
        }
        dq[0] = (-3.0 * q[0] + 4.0 * q[1] - q[2]) / (2.0 * h);
        dq[n - 1] = (3.0 * q[n - 1] - 4.0 * q[n - 2] + q[n - 3]) / (2.0 * h);

        let interior = res[1..n - 1].iter().fold(0.0f64, |s, v| s.max(v.abs())).max(res[0].abs());
        let mut profile = FrontProfile {
            x0,
            h,
            q,
            dq,
            c_star: c,
            gamma_star: m.gamma_star,
            left_rate: r,
            tail: TailFit { a: 0.0, b: 0.0, fit_err: f64::NAN, gamma: m.gamma_star, split: 0.0, window: (0.0, 0.0) },
            residual: interior,
            iterations,
        };
        let g = m.gamma_star;
        let hi = (30.0 / g).min(x_plus - 2.0 / g);
        let lo = (hi - 10.0 / g).max(10.0 / g);
        let tail = fit_asymptotics_with(&profile, (lo, hi), nl.df(0.0), self.fit_threshold)?;
        profile.tail = tail;
        Ok(profile)
    }

    #[allow(clippy::too_many_arguments)]
    fn newton_direction(
        &self,
        q: &[f64],
        res: &[f64],
        nl: &Nonlinearity<f64>,
        h: f64,
        r: f64,
        i0: usize,
        lo_c: f64,
        up_c: f64,
    ) -> Result<Vec<f64>, FrontError> {
        let n = q.len();
        let hi2 = 1.0 / (h * h);
        let mut delta = vec![0.0; n];
        delta[i0] = -res[n - 1];
        // Rows 0..i0 form a tridiagonal system in delta[0..i0].
        let m = i0;
        let mut lower = vec![0.0; m];
        let mut diag = vec![0.0; m];
        let mut upper = vec![0.0; m];
        let mut rhs = vec![0.0; m];
        diag[0] = -1.0 / h - 0.5 * r;
        upper[0] = 1.0 / h - 0.5 * r;
        rhs[0] = -res[0];
        for i in 1..m {
            lower[i] = lo_c;
            diag[i] = -2.0 * hi2 + nl.df(q[i]);
            upper[i] = up_c;
            rhs[i] = -res[i];
        }
        if m >= 1 {
            if m == 1 {
                rhs[0] -= upper[0] * delta[i0];
            } else {
                rhs[m - 1] -= up_c * delta[i0];
            }
            solve_tridiagonal(&lower, &diag, &upper, &mut rhs)?;
            delta[..m].copy_from_slice(&rhs);
        }
        // Remaining rows march forward from the phase node.
        for i in i0..n - 1 {
            let d = -2.0 * hi2 + nl.df(q[i]);
            delta[i + 1] = (-res[i] - lo_c * delta[i - 1] - d * delta[i]) / up_c;
        }
        Ok(delta)
    }
}

/// Exact decay rates of the discretized linearization at `q = 0`:
/// returns `(gamma_h, split_h)` so the two discrete rates are
/// `-gamma_h +- split_h`.
pub fn discrete_tail_rates(c: f64, f1at0: f64, h: f64) -> (f64, f64) {
    let a = 1.0 / (h * h) + c / (2.0 * h);
    let b = -2.0 / (h * h) + f1at0;
    let cc = 1.0 / (h * h) - c / (2.0 * h);
    let disc = (b * b - 4.0 * a * cc).max(0.0).sqrt();
    let z1 = (-b + disc) / (2.0 * a);
    let z2 = (-b - disc) / (2.0 * a);
    let (r1, r2) = (z1.ln() / h, z2.ln() / h);
    (-(r1 + r2) / 2.0, (r1 - r2).abs() / 2.0)
}

/// Fit the right tail of a grid profile on `window` with the default
/// acceptance threshold.
pub fn fit_asymptotics(p: &FrontProfile, window: (f64, f64), f1at0: f64) -> Result<TailFit, FrontError> {
    fit_asymptotics_with(p, window, f1at0, FrontSolver::default().fit_threshold)
}

fn fit_asymptotics_with(p: &FrontProfile, window: (f64, f64), f1at0: f64, threshold: f64) -> Result<TailFit, FrontError> {
    let (lo, hi) = window;
    let (left, right) = p.domain();
    if !(lo >= left && hi <= right && hi > lo) {
        return Err(FrontError::BadWindow { lo, hi });
    }
    let (gamma, split) = discrete_tail_rates(p.c_star, f1at0, p.h);
    let (xs, qs): (Vec<f64>, Vec<f64>) = (0..p.len())
        .map(|i| (p.x(i), p.q[i]))
        .filter(|(x, _)| *x >= lo - 1e-12 && *x <= hi + 1e-12)
        .unzip();
    fit_tail_samples(&xs, &qs, gamma, split, threshold)
}

/// Fit `q(x) e^{gamma x} ~ a cosh(s x) + b sinh(s x)/s` by least squares;
/// with `split = 0` this is the plain `(a + b x) e^{-gamma x}` fit.
pub fn fit_tail_samples(xs: &[f64], qs: &[f64], gamma: f64, split: f64, threshold: f64) -> Result<TailFit, FrontError> {
    let window = (xs.first().copied().unwrap_or(0.0), xs.last().copied().unwrap_or(0.0));
    if xs.len() < 3 {
        return Err(FrontError::BadWindow { lo: window.0, hi: window.1 });
    }
    let rows: Vec<Vec<f64>> = xs.iter().map(|&x| vec![(split * x).cosh(), shc(split, x)]).collect();
    let rhs: Vec<f64> = xs.iter().zip(qs).map(|(&x, &q)| q * (gamma * x).exp()).collect();
    let c = least_squares(&rows, &rhs)?;
    let mut fit = TailFit { a: c[0], b: c[1], fit_err: 0.0, gamma, split, window };
    fit.fit_err = xs
        .iter()
        .zip(qs)
        .fold(0.0f64, |m, (&x, &q)| m.max(((q - fit.eval(x)) / q).abs()));
    if !(fit.fit_err <= threshold) {
        return Err(FrontError::PoorTailFit { fit_err: fit.fit_err, threshold, lo: window.0, hi: window.1 });
    }
    Ok(fit)
}

/// Samples of `x -> q'(x) / omega(x)` on the profile grid.
#[derive(Clone, Debug, Serialize)]
pub struct SampledFunction {
    pub x: Vec<f64>,
    pub v: Vec<f64>,
}

/// The translation mode `omega^{-1} q'` of the weighted operator at `lambda = 0`.
pub fn derivative_mode(p: &FrontProfile, w: &crate::model::Weight<f64>) -> SampledFunction {
    let x = p.nodes();
    let v = x.iter().zip(&p.dq).map(|(&x, &d)| d / w.value(x)).collect();
    SampledFunction { x, v }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{DEFAULT_ALPHA, DEFAULT_BETA};

    #[test]
    fn synthetic_tail_fit_recovers_coefficients() {
        let xs: Vec<f64> = (0..=100).map(|i| 15.0 + i as f64 * 0.1).collect();
        let qs: Vec<f64> = xs.iter().map(|x| (1.0 + 2.0 * x) * (-x).exp()).collect();
        let fit = fit_tail_samples(&xs, &qs, 1.0, 0.0, 1e-3).unwrap();
        assert!((fit.a - 1.0).abs() < 1e-10 && (fit.b - 2.0).abs() < 1e-10);
        assert!(fit.fit_err < 1e-12);
    }

    #[test]
    fn discrete_rates_approach_double_root() {
        let (g, s) = discrete_tail_rates(2.0, 1.0, 0.02);
        assert!((g - 1.0).abs() < 2e-4);
        assert!((s - 0.01).abs() < 1e-4);
        let (g, s) = discrete_tail_rates(2.0, 1.0, 1e-4);
        assert!((g - 1.0).abs() < 1e-6 && s < 1e-4);
    }

    #[test]
    fn short_domain_is_rejected() {
        let nl = Nonlinearity::Kpp;
        let m = ModelParams::for_nonlinearity(&nl, DEFAULT_BETA, DEFAULT_ALPHA).unwrap();
        assert!(matches!(solve_front(&nl, &m, -30.0, 15.0, 0.05), Err(FrontError::DomainTooShort { .. })));
    }
}
