//! Reaction term, derived front constants, the exponential weight and the
//! coefficients of the weighted linearized operator.

use num_complex::Complex;
use serde::Serialize;
use thiserror::Error;

use crate::front::FrontProfile;
use crate::numeric::linalg::solve_dense;
use crate::scalar::Real;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("beta = {beta} outside (0, {beta_max})")]
    BetaOutOfRange { beta: f64, beta_max: f64 },
    #[error("alpha = {alpha} outside (0, {gamma_star})")]
    AlphaOutOfRange { alpha: f64, gamma_star: f64 },
    #[error("not a monostable KPP reaction: {0}")]
    NotKpp(String),
    #[error("unknown nonlinearity '{0}'")]
    UnknownNonlinearity(String),
    #[error("x = {x} outside the computed profile [{left}, {right}]")]
    OutsideProfile { x: f64, left: f64, right: f64 },
    #[error("lambda = {re}{im:+}i lies on the branch cut of the left rates")]
    BranchCut { re: f64, im: f64 },
}

/// Closed-form KPP reactions with `f(0) = f(1) = 0`, `f'(0) > 0`, `f'(1) < 0`
/// and `f'' < 0` on `(0, 1)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum Nonlinearity<T> {
    /// `u (1 - u)`
    Kpp,
    /// `r u (1 - u)`
    Logistic { rate: T },
    /// `u (1 - u^2)`
    Cubic,
}

impl<T: Real> Nonlinearity<T> {
    pub fn parse(name: &str) -> Result<Self, ModelError> {
        let name = name.trim();
        match name {
            "kpp" | "fisher" => Ok(Self::Kpp),
            "cubic" => Ok(Self::Cubic),
            _ => {
                if let Some(rest) = name.strip_prefix("logistic") {
                    let rate: f64 = rest
                        .trim_start_matches([':', '='])
                        .parse()
                        .map_err(|_| ModelError::UnknownNonlinearity(name.to_string()))?;
                    if !(rate > 0.0 && rate.is_finite()) {
                        return Err(ModelError::NotKpp(format!("logistic rate {rate} must be positive")));
                    }
                    Ok(Self::Logistic { rate: T::lit(rate) })
                } else {
                    Err(ModelError::UnknownNonlinearity(name.to_string()))
                }
            }
        }
    }

    pub fn name(&self) -> String {
        match self {
            Self::Kpp => "kpp".into(),
            Self::Logistic { rate } => format!("logistic:{rate}"),
            Self::Cubic => "cubic".into(),
        }
    }

    pub fn f(&self, u: T) -> T {
        match *self {
            Self::Kpp => u * (T::one() - u),
            Self::Logistic { rate } => rate * u * (T::one() - u),
            Self::Cubic => u * (T::one() - u * u),
        }
    }

    pub fn df(&self, u: T) -> T {
        let two = T::lit(2.0);
        match *self {
            Self::Kpp => T::one() - two * u,
            Self::Logistic { rate } => rate * (T::one() - two * u),
            Self::Cubic => T::one() - T::lit(3.0) * u * u,
        }
    }

    pub fn d2f(&self, u: T) -> T {
        match *self {
            Self::Kpp => T::lit(-2.0),
            Self::Logistic { rate } => T::lit(-2.0) * rate,
            Self::Cubic => T::lit(-6.0) * u,
        }
    }

    /// `(f(mu + nu) - f(mu) - f'(mu) nu) / nu`, continuous at `nu = 0`.
    pub fn remainder(&self, mu: T, nu: T) -> T {
        if nu.abs() < T::lit(1e-8) {
            return self.d2f(mu) * nu * T::lit(0.5);
        }
        match *self {
            // Exact forms avoid the cancellation in the difference quotient.
            Self::Kpp => -nu,
            Self::Logistic { rate } => -rate * nu,
            Self::Cubic => -(T::lit(3.0) * mu + nu) * nu,
        }
    }

    /// Remainder from the raw difference quotient, kept as a cross-check of
    /// the closed forms.
    pub fn remainder_quotient(&self, mu: T, nu: T) -> T {
        if nu.abs() < T::lit(1e-8) {
            return self.d2f(mu) * nu * T::lit(0.5);
        }
        (self.f(mu + nu) - self.f(mu) - self.df(mu) * nu) / nu
    }
}

/// Log-weight `log omega`: `-gamma x` for `x >= 1`, `beta x` for `x <= -1`,
/// and a degree-6 polynomial bridge on `[-1, 1]` matching value, slope and
/// curvature at both ends with `omega(0) = 1`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Weight<T> {
    pub beta: T,
    pub gamma: T,
    /// Bridge coefficients, lowest degree first.
    pub bridge: [T; 7],
}

impl<T: Real> Weight<T> {
    pub fn new(beta: T, gamma: T) -> Self {
        let mut rows = Vec::with_capacity(7);
        let mut rhs = Vec::with_capacity(7);
        let row = |x: T, d: usize| -> Vec<T> {
            (0..7)
                .map(|k| {
                    if k < d {
                        return T::zero();
                    }
                    let mut fac = T::one();
                    for j in 0..d {
                        fac = fac * T::from_usize(k - j).unwrap();
                    }
                    fac * x.powi((k - d) as i32)
                })
                .collect()
        };
        let one = T::one();
        for (x, d, v) in [
            (-one, 0, -beta),
            (-one, 1, beta),
            (-one, 2, T::zero()),
            (one, 0, -gamma),
            (one, 1, -gamma),
            (one, 2, T::zero()),
            (T::zero(), 0, T::zero()),
        ] {
            rows.push(row(x, d));
            rhs.push(v);
        }
        let c = solve_dense(rows, rhs).expect("bridge interpolation system is nonsingular");
        let mut bridge = [T::zero(); 7];
        bridge.copy_from_slice(&c);
        Self { beta, gamma, bridge }
    }

    /// `(log omega, (log omega)', (log omega)'')` at `x`.
    pub fn log_derivs(&self, x: T) -> (T, T, T) {
        if x >= T::one() {
            (-self.gamma * x, -self.gamma, T::zero())
        } else if x <= -T::one() {
            (self.beta * x, self.beta, T::zero())
        } else {
            let c = &self.bridge;
            let mut p = T::zero();
            let mut dp = T::zero();
            let mut d2p = T::zero();
            for k in (0..7).rev() {
                d2p = d2p * x + dp * T::lit(2.0);
                dp = dp * x + p;
                p = p * x + c[k];
            }
            (p, dp, d2p)
        }
    }

    pub fn value(&self, x: T) -> T {
        self.log_derivs(x).0.exp()
    }

    pub fn log_value(&self, x: T) -> T {
        self.log_derivs(x).0
    }

    /// `omega'' / omega = p'' + p'^2`.
    pub fn second_ratio(&self, x: T) -> T {
        let (_, d1, d2) = self.log_derivs(x);
        d2 + d1 * d1
    }
}

/// Front constants and weight parameters derived from `f'(0)`, `f'(1)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ModelParams<T> {
    pub f1at0: T,
    pub f1at1: T,
    pub c_star: T,
    pub gamma_star: T,
    pub beta: T,
    pub beta_max: T,
    pub alpha: T,
    pub weight: Weight<T>,
}

/// Default left weight rate.
pub const DEFAULT_BETA: f64 = 0.2;
/// Default algebraic decay rate of the mode remainders.
pub const DEFAULT_ALPHA: f64 = 0.8;

impl<T: Real> ModelParams<T> {
    pub fn new(f1at0: T, f1at1: T, beta: T, alpha: T) -> Result<Self, ModelError> {
        if !(f1at0 > T::zero()) {
            return Err(ModelError::NotKpp(format!("f'(0) = {f1at0} must be positive")));
        }
        if !(f1at1 < T::zero()) {
            return Err(ModelError::NotKpp(format!("f'(1) = {f1at1} must be negative")));
        }
        let two = T::lit(2.0);
        let gamma_star = f1at0.sqrt();
        let c_star = two * gamma_star;
        let half_c = c_star / two;
        let beta_max = -half_c + (half_c * half_c - f1at1).sqrt();
        if !(beta > T::zero() && beta < beta_max) {
            return Err(ModelError::BetaOutOfRange { beta: beta.as_f64(), beta_max: beta_max.as_f64() });
        }
        if !(alpha > T::zero() && alpha < gamma_star) {
            return Err(ModelError::AlphaOutOfRange { alpha: alpha.as_f64(), gamma_star: gamma_star.as_f64() });
        }
        Ok(Self {
            f1at0,
            f1at1,
            c_star,
            gamma_star,
            beta,
            beta_max,
            alpha,
            weight: Weight::new(beta, gamma_star),
        })
    }

    pub fn for_nonlinearity(nl: &Nonlinearity<T>, beta: T, alpha: T) -> Result<Self, ModelError> {
        let m = Self::new(nl.df(T::zero()), nl.df(T::one()), beta, alpha)?;
        // Concavity on a sample grid; the closed forms all satisfy it.
        for i in 1..64 {
            let u = T::from_usize(i).unwrap() / T::lit(64.0);
            if !(nl.d2f(u) < T::zero()) {
                return Err(ModelError::NotKpp(format!("f'' >= 0 at u = {u}")));
            }
        }
        Ok(m)
    }

    /// `zeta_1 = c* + 2 (log omega)'`.
    pub fn zeta1(&self, x: T) -> T {
        self.c_star + T::lit(2.0) * self.weight.log_derivs(x).1
    }

    /// Limit of `zeta_0` at `-infinity`: `f'(1) + c* beta + beta^2`.
    pub fn zeta0_left(&self) -> T {
        self.f1at1 + self.c_star * self.beta + self.beta * self.beta
    }

    /// Limit of `zeta_1` at `-infinity`.
    pub fn zeta1_left(&self) -> T {
        self.c_star + T::lit(2.0) * self.beta
    }

    /// Rates `mu_+` (sign > 0) or `mu_-` of `e^{mu x}` solutions at `-infinity`.
    pub fn mu(&self, lambda: Complex<T>, sign: i8) -> Result<Complex<T>, ModelError> {
        let z1 = self.zeta1_left();
        let arg = Complex::new(z1 * z1 - T::lit(4.0) * self.zeta0_left(), T::zero()) + lambda * T::lit(4.0);
        if arg.im == T::zero() && arg.re < T::zero() {
            return Err(ModelError::BranchCut { re: lambda.re.as_f64(), im: lambda.im.as_f64() });
        }
        let root = arg.sqrt() * T::lit(0.5);
        let base = Complex::new(-z1 * T::lit(0.5), T::zero());
        Ok(if sign >= 0 { base + root } else { base - root })
    }

    /// Signed horizontal distance from `lambda` to the essential-spectrum
    /// curve `{-l^2 + zeta0_left + i (c* + 2 beta) l}`; positive to its right.
    pub fn gamma_minus_distance(&self, lambda: Complex<T>) -> T {
        let l = lambda.im / self.zeta1_left();
        lambda.re - (self.zeta0_left() - l * l)
    }
}

/// `zeta_0(x) = f'(q(x)) + c* (log omega)' + omega''/omega`, strictly on the
/// computed profile's domain.
pub fn zeta0(
    x: f64,
    profile: &FrontProfile,
    m: &ModelParams<f64>,
    nl: &Nonlinearity<f64>,
) -> Result<f64, ModelError> {
    let (left, right) = profile.domain();
    if !(x >= left && x <= right) {
        return Err(ModelError::OutsideProfile { x, left, right });
    }
    Ok(zeta0_extended(x, profile, m, nl))
}

/// As [`zeta0`] but using the profile's asymptotic tails outside its grid.
pub fn zeta0_extended(x: f64, profile: &FrontProfile, m: &ModelParams<f64>, nl: &Nonlinearity<f64>) -> f64 {
    let q = profile.q_at(x);
    let (_, d1, _) = m.weight.log_derivs(x);
    nl.df(q) + m.c_star * d1 + m.weight.second_ratio(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kpp() -> ModelParams<f64> {
        ModelParams::new(1.0, -1.0, DEFAULT_BETA, DEFAULT_ALPHA).unwrap()
    }

    #[test]
    fn kpp_constants() {
        let m = kpp();
        assert_eq!(m.c_star, 2.0);
        assert_eq!(m.gamma_star, 1.0);
        assert!((m.beta_max - (2f64.sqrt() - 1.0)).abs() < 1e-15);
        assert!((m.beta_max - 0.41421).abs() < 1e-5);
        assert!((m.zeta0_left() + 0.56).abs() < 1e-15);
    }

    #[test]
    fn rejects_out_of_range_parameters() {
        assert!(matches!(ModelParams::new(1.0, -1.0, 0.5, 0.8), Err(ModelError::BetaOutOfRange { .. })));
        assert!(matches!(ModelParams::new(1.0, -1.0, 0.2, 1.0), Err(ModelError::AlphaOutOfRange { .. })));
        assert!(ModelParams::new(1.0, 0.5, 0.2, 0.5).is_err());
    }

    #[test]
    fn weight_matches_exponentials_and_is_c2() {
        let m = kpp();
        let w = &m.weight;
        assert!((w.value(0.0) - 1.0).abs() < 1e-15);
        assert!((w.value(3.0) - (-3f64).exp()).abs() < 1e-16);
        assert!((w.value(-5.0) - (-1f64).exp()).abs() < 1e-15);
        for x0 in [-1.0, 1.0] {
            let a = w.log_derivs(x0 - 1e-12);
            let b = w.log_derivs(x0 + 1e-12);
            assert!((a.0 - b.0).abs() < 1e-10);
            assert!((a.1 - b.1).abs() < 1e-10);
            assert!((a.2 - b.2).abs() < 1e-9);
        }
    }

    #[test]
    fn zeta1_limits() {
        let m = kpp();
        assert!((m.zeta1(5.0) - 0.0).abs() < 1e-15);
        assert!((m.zeta1(-5.0) - 2.4).abs() < 1e-15);
    }

    #[test]
    fn mu_at_zero() {
        let m = kpp();
        let p = m.mu(Complex::new(0.0, 0.0), 1).unwrap();
        let q = m.mu(Complex::new(0.0, 0.0), -1).unwrap();
        assert!((p.re - 0.214214).abs() < 1e-6 && p.im == 0.0);
        assert!((q.re + 2.614214).abs() < 1e-6);
        assert!(m.mu(Complex::new(-3.0, 0.0), 1).is_err());
    }

    #[test]
    fn gamma_minus_distance_examples() {
        let m = kpp();
        assert!((m.gamma_minus_distance(Complex::new(0.0, 0.0)) - 0.56).abs() < 1e-14);
        assert!(m.gamma_minus_distance(Complex::new(-1.56, 2.4)).abs() < 1e-14);
    }

    #[test]
    fn generic_model_in_f32() {
        let m = ModelParams::<f32>::new(1.0, -1.0, 0.2, 0.8).unwrap();
        assert!((m.beta_max - 0.414_213_56).abs() < 1e-6);
        assert!((m.weight.value(2.0) - (-2.0f32).exp()).abs() < 1e-6);
    }

    #[test]
    fn registry() {
        let c = Nonlinearity::<f64>::parse("cubic").unwrap();
        let m = ModelParams::for_nonlinearity(&c, 0.2, 0.8).unwrap();
        assert_eq!(m.f1at1, -2.0);
        let l = Nonlinearity::<f64>::parse("logistic:4").unwrap();
        let m = ModelParams::for_nonlinearity(&l, 0.5, 1.0).unwrap();
        assert_eq!(m.c_star, 4.0);
        assert!(Nonlinearity::<f64>::parse("bistable").is_err());
    }
}
