//! Coefficients of weighted linear operators `L = d_xx + zeta1 d_x + zeta0`.
//!
//! Both operators used by the laboratory have coefficients that are constant
//! outside a finite interval `[left_edge, right_edge]` (to rounding), which
//! lets the mode solvers switch to exact exponentials there.

use std::sync::Arc;

use num_complex::Complex64;

use crate::front::FrontProfile;
use crate::model::{ModelError, ModelParams, Nonlinearity};

pub trait Coefficients: Send + Sync {
    fn zeta0(&self, x: f64) -> f64;
    fn zeta1(&self, x: f64) -> f64;
    fn left_edge(&self) -> f64;
    fn right_edge(&self) -> f64;
    /// `(zeta0, zeta1)` at `-infinity`.
    fn left_limit(&self) -> (f64, f64);
    /// `(zeta0, zeta1)` at `+infinity`.
    fn right_limit(&self) -> (f64, f64);
    /// Points where the coefficients lose smoothness.
    fn breakpoints(&self) -> &[f64];

    /// Rates `(mu_+, mu_-)` of exponential solutions at `-infinity`.
    fn left_rates(&self, lambda: Complex64) -> Result<(Complex64, Complex64), ModelError> {
        rates(self.left_limit(), lambda)
    }

    /// Rates `(+sqrt, -sqrt)`-type pair at `+infinity`; the second decays.
    fn right_rates(&self, lambda: Complex64) -> Result<(Complex64, Complex64), ModelError> {
        rates(self.right_limit(), lambda)
    }

    /// Signed distance to the rightmost essential-spectrum curve coming
    /// from `-infinity`; positive to its right.
    fn left_curve_distance(&self, lambda: Complex64) -> f64 {
        let (z0, z1) = self.left_limit();
        if z1 == 0.0 {
            if lambda.im == 0.0 && lambda.re <= z0 {
                return 0.0;
            }
            return f64::INFINITY;
        }
        let l = lambda.im / z1;
        lambda.re - (z0 - l * l)
    }

    /// Decay rate of the coefficients towards their `+infinity` limit; the
    /// growing mode psi+ is only defined while `2 Re sqrt(lambda)` stays
    /// below it.
    fn decay_alpha(&self) -> f64 {
        f64::INFINITY
    }
}

/// Roots of `mu^2 + zeta1 mu + zeta0 - lambda = 0`, larger real part first.
fn rates(limit: (f64, f64), lambda: Complex64) -> Result<(Complex64, Complex64), ModelError> {
    let (z0, z1) = limit;
    let arg = Complex64::new(z1 * z1 - 4.0 * z0, 0.0) + 4.0 * lambda;
    if arg.im == 0.0 && arg.re < 0.0 {
        return Err(ModelError::BranchCut { re: lambda.re, im: lambda.im });
    }
    let root = 0.5 * arg.sqrt();
    let base = Complex64::new(-0.5 * z1, 0.0);
    Ok((base + root, base - root))
}

/// The weighted linearization about the computed front.
#[derive(Clone, Debug)]
pub struct FrontOperator {
    pub profile: Arc<FrontProfile>,
    pub params: ModelParams<f64>,
    pub nl: Nonlinearity<f64>,
    left_edge: f64,
    right_edge: f64,
    breaks: [f64; 2],
}

impl FrontOperator {
    pub fn new(profile: Arc<FrontProfile>, params: ModelParams<f64>, nl: Nonlinearity<f64>) -> Self {
        let mut op = Self { profile, params, nl, left_edge: -1.0, right_edge: 1.0, breaks: [-1.0, 1.0] };
        // Walk outward until the reaction coefficient reaches its limit to
        // rounding; beyond that the exponential solutions are exact.
        let eps = 1e-16;
        let f0 = op.nl.df(0.0);
        let f1 = op.nl.df(1.0);
        let mut x = 1.0;
        while x < 400.0 && (op.nl.df(op.profile.q_at(x)) - f0).abs() > eps {
            x += 0.25;
        }
        op.right_edge = x;
        let mut x = -1.0;
        while x > -400.0 && (op.nl.df(op.profile.q_at(x)) - f1).abs() > eps {
            x -= 0.25;
        }
        op.left_edge = x;
        op
    }

    pub fn omega(&self, x: f64) -> f64 {
        self.params.weight.value(x)
    }
}

impl Coefficients for FrontOperator {
    fn zeta0(&self, x: f64) -> f64 {
        crate::model::zeta0_extended(x, &self.profile, &self.params, &self.nl)
    }

    fn zeta1(&self, x: f64) -> f64 {
        self.params.zeta1(x)
    }

    fn left_edge(&self) -> f64 {
        self.left_edge
    }

    fn right_edge(&self) -> f64 {
        self.right_edge
    }

    fn left_limit(&self) -> (f64, f64) {
        (self.params.zeta0_left(), self.params.zeta1_left())
    }

    fn right_limit(&self) -> (f64, f64) {
        (0.0, 0.0)
    }

    fn breakpoints(&self) -> &[f64] {
        &self.breaks
    }

    fn decay_alpha(&self) -> f64 {
        self.params.alpha
    }
}

/// `L = d_xx`: the pure-heat control with closed-form Green's function.
#[derive(Clone, Copy, Debug, Default)]
pub struct HeatOperator;

impl Coefficients for HeatOperator {
    fn zeta0(&self, _x: f64) -> f64 {
        0.0
    }
    fn zeta1(&self, _x: f64) -> f64 {
        0.0
    }
    fn left_edge(&self) -> f64 {
        0.0
    }
    fn right_edge(&self) -> f64 {
        0.0
    }
    fn left_limit(&self) -> (f64, f64) {
        (0.0, 0.0)
    }
    fn right_limit(&self) -> (f64, f64) {
        (0.0, 0.0)
    }
    fn breakpoints(&self) -> &[f64] {
        &[]
    }
}

/// Heat kernel `e^{-(x-y)^2 / 4t} / sqrt(4 pi t)`.
pub fn heat_kernel(t: f64, x: f64, y: f64) -> f64 {
    (-(x - y).powi(2) / (4.0 * t)).exp() / (4.0 * std::f64::consts::PI * t).sqrt()
}

/// Heat resolvent kernel `e^{-sqrt(lambda)|x-y|} / (2 sqrt(lambda))`.
pub fn heat_resolvent(lambda: Complex64, x: f64, y: f64) -> Complex64 {
    let s = lambda.sqrt();
    (-s * (x - y).abs()).exp() / (2.0 * s)
}
