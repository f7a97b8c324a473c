//! Line fits used for decay rates and bound constants.

use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LineFit<T> {
    pub slope: T,
    pub intercept: T,
    /// Largest absolute residual of the fit.
    pub max_residual: T,
}

/// Ordinary least-squares line through `(x, y)`.
pub fn fit_line<T: Real>(x: &[T], y: &[T]) -> Option<LineFit<T>> {
    let n = x.len();
    if n < 2 || y.len() != n {
        return None;
    }
    let nf = T::from_usize(n)?;
    let mx = x.iter().fold(T::zero(), |s, v| s + *v) / nf;
    let my = y.iter().fold(T::zero(), |s, v| s + *v) / nf;
    let mut sxx = T::zero();
    let mut sxy = T::zero();
    for (a, b) in x.iter().zip(y) {
        sxx = sxx + (*a - mx) * (*a - mx);
        sxy = sxy + (*a - mx) * (*b - my);
    }
    if sxx == T::zero() {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let max_residual = x
        .iter()
        .zip(y)
        .fold(T::zero(), |m, (a, b)| m.max((*b - intercept - slope * *a).abs()));
    Some(LineFit { slope, intercept, max_residual })
}

/// Slope of `log v` against `log t`.
pub fn loglog_slope<T: Real>(t: &[T], v: &[T]) -> Option<LineFit<T>> {
    if t.iter().chain(v).any(|a| *a <= T::zero()) {
        return None;
    }
    let lt: Vec<T> = t.iter().map(|a| a.ln()).collect();
    let lv: Vec<T> = v.iter().map(|a| a.ln()).collect();
    fit_line(&lt, &lv)
}

/// Smallest `C` and fitted decay `rate` with `|v(x)| <= C exp(-rate x)` on the
/// samples: the rate comes from a least-squares line through `log |v|`, then
/// `C` is raised until the envelope covers every sample. Zero samples are
/// skipped.
pub fn exponential_envelope<T: Real>(x: &[T], v: &[T]) -> Option<(T, T)> {
    let pts: Vec<(T, T)> = x
        .iter()
        .zip(v)
        .filter(|(_, b)| **b != T::zero())
        .map(|(a, b)| (*a, b.abs().ln()))
        .collect();
    let xs: Vec<T> = pts.iter().map(|p| p.0).collect();
    let ys: Vec<T> = pts.iter().map(|p| p.1).collect();
    let line = fit_line(&xs, &ys)?;
    let rate = -line.slope;
    let log_c = pts.iter().fold(T::neg_infinity(), |m, (a, b)| m.max(*b + rate * *a));
    Some((log_c.exp(), rate))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loglog_slope_of_power_law() {
        let t = [10.0, 20.0, 40.0, 80.0];
        let v: Vec<f64> = t.iter().map(|s: &f64| 3.0 * s.powf(-1.5)).collect();
        let f = loglog_slope(&t, &v).unwrap();
        assert!((f.slope + 1.5).abs() < 1e-12);
        assert!((f.intercept - 3f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn envelope_covers_samples() {
        let x: Vec<f32> = (0..30).map(|i| i as f32 * 0.5).collect();
        let v: Vec<f32> = x.iter().map(|s| 2.0 * (-0.8 * s).exp() * (1.0 + 0.3 * s.sin())).collect();
        let (c, rate) = exponential_envelope(&x, &v).unwrap();
        assert!((rate - 0.8).abs() < 0.05);
        for (a, b) in x.iter().zip(&v) {
            assert!(b.abs() <= c * (-rate * a).exp() * 1.0001);
        }
    }
}
