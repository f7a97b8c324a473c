//! Pointwise resolvent kernel `G_lambda(x, y)` with
//! `(L - lambda) G_lambda(., y) = -delta_y`, assembled from phi+ and phi-.

use num_complex::Complex64 as C;
use serde::Serialize;

use crate::model::ModelParams;
use crate::modes::{solve_mode, ModeError, ModeKind, ModeOptions, ModeSolution, SpectralPoint};
use crate::numeric::fit::fit_line;
use crate::numeric::linalg::solve_tridiagonal;
use crate::operator::Coefficients;

/// phi+ and phi- at a common set of ascending nodes.
#[derive(Clone, Debug)]
pub struct Resolvent {
    pub point: SpectralPoint,
    pub phi_plus: ModeSolution,
    pub phi_minus: ModeSolution,
}

impl Resolvent {
    pub fn new(op: &dyn Coefficients, point: SpectralPoint, nodes: &[f64], opts: &ModeOptions) -> Result<Self, ModeError> {
        let phi_plus = solve_mode(op, ModeKind::PhiPlus, &point, nodes, opts)?;
        let phi_minus = solve_mode(op, ModeKind::PhiMinus, &point, nodes, opts)?;
        Ok(Self { point, phi_plus, phi_minus })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.phi_plus.nodes
    }

    /// Scaled determinant `z+_1 z-_2 - z+_2 z-_1` at node `j`.
    fn det(&self, j: usize) -> C {
        let a = self.phi_plus.z[j];
        let b = self.phi_minus.z[j];
        a[0] * b[1] - a[1] * b[0]
    }

    /// `log W_lambda(y_j)`, from the envelope determinant with the
    /// exponents re-attached analytically.
    pub fn log_wronskian(&self, j: usize) -> C {
        let y = self.nodes()[j];
        (self.phi_plus.rate + self.phi_minus.rate) * y
            + self.phi_plus.log_scale[j]
            + self.phi_minus.log_scale[j]
            + self.det(j).ln()
    }

    pub fn wronskian(&self, j: usize) -> C {
        self.log_wronskian(j).exp()
    }

    /// `W / (|P+| |P-|)`: the sine of the angle between the two modes.
    pub fn normalized_wronskian(&self, j: usize) -> C {
        let n = |v: [C; 2]| (v[0].norm_sqr() + v[1].norm_sqr()).sqrt();
        self.det(j) / (n(self.phi_plus.z[j]) * n(self.phi_minus.z[j]))
    }

    /// `G_lambda(x_i, y_j)`.
    pub fn green(&self, i: usize, j: usize) -> C {
        self.green_component(i, j, 0, self.nodes()[i] >= self.nodes()[j])
    }

    /// `d/dx G_lambda(x_i, y_j)`; at `i == j` the side is chosen by `right`.
    pub fn green_dx(&self, i: usize, j: usize, right: bool) -> C {
        let side = if i == j { right } else { self.nodes()[i] > self.nodes()[j] };
        self.green_component(i, j, 1, side)
    }

    /// `u_i = sum_j G_lambda(x_i, y_j) c_j` over all node pairs in O(n), by
    /// running the two one-sided sums of the variation-of-parameters formula.
    pub fn apply(&self, c: &[C]) -> Vec<C> {
        let n = self.nodes().len();
        assert_eq!(c.len(), n);
        let (pp, pm) = (&self.phi_plus, &self.phi_minus);
        let x = self.nodes();
        let q: Vec<C> = (0..n).map(|j| c[j] / self.det(j)).collect();
        let mut out = vec![C::new(0.0, 0.0); n];
        let mut a = C::new(0.0, 0.0);
        for i in 0..n {
            if i > 0 {
                a *= (pp.rate * (x[i] - x[i - 1]) + pp.log_scale[i] - pp.log_scale[i - 1]).exp();
            }
            a += pm.z[i][0] * q[i];
            out[i] = pp.z[i][0] * a;
        }
        let mut b = C::new(0.0, 0.0);
        for i in (0..n).rev() {
            if i + 1 < n {
                b *= (pm.rate * (x[i] - x[i + 1]) + pm.log_scale[i] - pm.log_scale[i + 1]).exp();
            }
            b += pp.z[i][0] * q[i];
            out[i] += pm.z[i][0] * (b - pp.z[i][0] * q[i]);
        }
        out
    }

    fn green_component(&self, i: usize, j: usize, comp: usize, upper: bool) -> C {
        let x = self.nodes()[i];
        let y = self.nodes()[j];
        let d = self.det(j);
        let (near, far) = if upper { (&self.phi_plus, &self.phi_minus) } else { (&self.phi_minus, &self.phi_plus) };
        let expo = near.rate * (x - y) + near.log_scale[i] - near.log_scale[j];
        expo.exp() * near.z[i][comp] * far.z[j][0] / d
    }
}

/// `G_lambda(x, y)` for a single pair.
pub fn green_lambda(op: &dyn Coefficients, point: SpectralPoint, x: f64, y: f64, opts: &ModeOptions) -> Result<C, ModeError> {
    let (nodes, i, j) = if x <= y { (vec![x, y], 0, 1) } else { (vec![y, x], 1, 0) };
    let r = Resolvent::new(op, point, &nodes, opts)?;
    Ok(r.green(i, j))
}

/// Finite-difference oracle for `G_lambda(., y)`: solves
/// `(L_h - lambda) g = -e_y / h` on the grid `y + k h`, `-n_left <= k <= n_right`,
/// with centered differences and the radiation conditions `g' = mu+ g` on the
/// left and `g' = -sqrt(lambda) g` on the right (ghost-point form).
pub fn discrete_resolvent(
    op: &dyn Coefficients,
    lambda: C,
    y: f64,
    h: f64,
    n_left: usize,
    n_right: usize,
) -> Result<(Vec<f64>, Vec<C>), ModeError> {
    let n = n_left + n_right + 1;
    let xs: Vec<f64> = (0..n).map(|k| y + (k as f64 - n_left as f64) * h).collect();
    let left = op.left_rates(lambda)?.0;
    let right = op.right_rates(lambda)?.1;
    let (mut lo, mut di, mut up) = (vec![C::new(0.0, 0.0); n], vec![C::new(0.0, 0.0); n], vec![C::new(0.0, 0.0); n]);
    for (k, &x) in xs.iter().enumerate() {
        let z1 = op.zeta1(x);
        let a = 1.0 / (h * h) - z1 / (2.0 * h);
        let c = 1.0 / (h * h) + z1 / (2.0 * h);
        di[k] = C::new(op.zeta0(x) - 2.0 / (h * h), 0.0) - lambda;
        lo[k] = C::new(a, 0.0);
        up[k] = C::new(c, 0.0);
        if k == 0 {
            // g_{-1} = g_1 - 2 h mu+ g_0
            up[k] += a;
            di[k] -= a * 2.0 * h * left;
        }
        if k == n - 1 {
            // g_{n} = g_{n-2} + 2 h rate g_{n-1}
            lo[k] += c;
            di[k] += c * 2.0 * h * right;
        }
    }
    let mut rhs = vec![C::new(0.0, 0.0); n];
    rhs[n_left] = C::new(-1.0 / h, 0.0);
    solve_tridiagonal(&lo, &di, &up, &mut rhs)?;
    Ok((xs, rhs))
}

/// The six orderings of `(x, y)` relative to each other and to the origin.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Regime {
    /// `y <= 0 <= x`
    I,
    /// `x <= 0 <= y`
    II,
    /// `0 <= y <= x`
    III,
    /// `0 <= x <= y`
    IV,
    /// `y <= x <= 0`
    V,
    /// `x <= y <= 0`
    VI,
}

impl Regime {
    pub const ALL: [Regime; 6] = [Regime::I, Regime::II, Regime::III, Regime::IV, Regime::V, Regime::VI];

    pub fn of(x: f64, y: f64) -> Regime {
        if y <= 0.0 && x >= 0.0 {
            Regime::I
        } else if x <= 0.0 && y >= 0.0 {
            Regime::II
        } else if y >= 0.0 && x >= y {
            Regime::III
        } else if x >= 0.0 {
            Regime::IV
        } else if x >= y {
            Regime::V
        } else {
            Regime::VI
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Regime::I => "i",
            Regime::II => "ii",
            Regime::III => "iii",
            Regime::IV => "iv",
            Regime::V => "v",
            Regime::VI => "vi",
        }
    }

    /// Magnitude of the predicted small-`lambda` envelope.
    pub fn envelope(&self, x: f64, y: f64, s: C, mu_p: C, mu_m: C, alpha: f64) -> f64 {
        let e = match self {
            Regime::I => -s * (x - y) + (mu_p - s) * y,
            Regime::II => s * (x - y) + (mu_p - s) * x,
            Regime::III => -s * (x - y) + (s - alpha) * y,
            Regime::IV => s * (x - y) + (s - alpha) * x,
            Regime::V => mu_m * (x - y),
            Regime::VI => mu_p * (x - y),
        };
        e.re.exp()
    }

    /// Envelope that actually holds uniformly as `lambda -> 0`. It differs
    /// from [`Regime::envelope`] in regimes iii and iv, where phi- grows
    /// linearly on the right at the branch point, so the factor
    /// `e^{(sqrt(lambda) - alpha) y}` is replaced by `1 + y` (resp. `1 + x`).
    pub fn uniform_envelope(&self, x: f64, y: f64, s: C, mu_p: C, mu_m: C, alpha: f64) -> f64 {
        match self {
            Regime::III => (-s * (x - y)).re.exp() * (1.0 + y),
            Regime::IV => (s * (x - y)).re.exp() * (1.0 + x),
            _ => self.envelope(x, y, s, mu_p, mu_m, alpha),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RegimeBound {
    pub regime: Regime,
    /// Largest `|G| / envelope` over the sampled grid.
    pub max_ratio: f64,
    /// Same with [`Regime::uniform_envelope`].
    pub max_ratio_uniform: f64,
    pub samples: usize,
}

/// Ratios of `|G_lambda|` to the predicted envelope per regime.
pub fn verify_small_lambda_bounds(
    op: &dyn Coefficients,
    m: &ModelParams<f64>,
    lambdas: &[C],
    nodes: &[f64],
    opts: &ModeOptions,
) -> Result<Vec<RegimeBound>, ModeError> {
    let mut best: Vec<RegimeBound> =
        Regime::ALL.iter().map(|&r| RegimeBound { regime: r, max_ratio: 0.0, max_ratio_uniform: 0.0, samples: 0 }).collect();
    for &lambda in lambdas {
        let point = SpectralPoint::at(lambda);
        let res = Resolvent::new(op, point, nodes, opts)?;
        let (mu_p, mu_m) = op.left_rates(lambda)?;
        let s = point.sqrt_lambda;
        for (i, &x) in nodes.iter().enumerate() {
            for (j, &y) in nodes.iter().enumerate() {
                let reg = Regime::of(x, y);
                let g = res.green(i, j).norm();
                let b = &mut best[reg as usize];
                b.max_ratio = b.max_ratio.max(g / reg.envelope(x, y, s, mu_p, mu_m, m.alpha));
                b.max_ratio_uniform = b.max_ratio_uniform.max(g / reg.uniform_envelope(x, y, s, mu_p, mu_m, m.alpha));
                b.samples += 1;
            }
        }
    }
    Ok(best)
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct LargeLambdaFit {
    pub c: f64,
    pub eta: f64,
}

/// Fit `|G_lambda| <= C |lambda|^{-1/2} e^{-eta sqrt|lambda| |x - y|}`:
/// `eta` is the smallest per-`lambda` decay slope, `C` the resulting sup.
pub fn verify_large_lambda_bound(
    op: &dyn Coefficients,
    lambdas: &[C],
    pairs: &[(f64, f64)],
    opts: &ModeOptions,
) -> Result<LargeLambdaFit, ModeError> {
    let mut nodes: Vec<f64> = pairs.iter().flat_map(|&(x, y)| [x, y]).collect();
    nodes.sort_by(|a, b| a.partial_cmp(b).unwrap());
    nodes.dedup();
    let idx = |v: f64| nodes.iter().position(|&n| n == v).unwrap();
    let mut samples = Vec::new();
    let mut eta = f64::INFINITY;
    for &lambda in lambdas {
        let res = Resolvent::new(op, SpectralPoint::at(lambda), &nodes, opts)?;
        let r = lambda.norm().sqrt();
        let (mut u, mut v) = (Vec::new(), Vec::new());
        for &(x, y) in pairs {
            let g = res.green(idx(x), idx(y)).norm();
            samples.push((r, (x - y).abs(), g));
            u.push(r * (x - y).abs());
            v.push((g * r).ln());
        }
        if let Some(line) = fit_line(&u, &v) {
            eta = eta.min(-line.slope);
        }
    }
    let c = samples.iter().fold(0.0f64, |m, &(r, d, g)| m.max(g * r * (r * eta * d).exp()));
    Ok(LargeLambdaFit { c, eta })
}
