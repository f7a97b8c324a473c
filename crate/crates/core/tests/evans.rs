mod common;

use kpp_core::evans::*;
use kpp_core::modes::{ModeOptions, SpectralPoint};
use num_complex::Complex64 as C;

const C_STAR: f64 = 2.0;
const BETA: f64 = 0.2;

fn opts() -> ModeOptions {
    ModeOptions::default()
}

fn small_lambdas() -> Vec<C> {
    let mut out = Vec::new();
    for r in [0.4, 0.1, 0.02, 0.004, 0.0008] {
        for arg in [-2.5, -1.2, 0.3, 1.0, 2.0, 2.8] {
            out.push(C::from_polar(r, arg));
        }
    }
    out.truncate(20);
    out
}

#[test]
fn wronskian_at_zero_tends_to_minus_gamma_b() {
    let op = common::kpp_operator();
    let (w, err) = matched_wronskian_at_zero(op, &op.profile, &op.params.weight, 20.0, &opts()).unwrap();
    let target = -1.0 * op.profile.tail.b;
    assert!(err < 1e-4, "match error {err}");
    assert!(w.im.abs() < 1e-12 * w.norm());
    assert!((w.re - target).abs() < 5e-2 * target.abs(), "{w} vs {target}");
}

#[test]
fn wronskian_at_zero_does_not_vanish() {
    let op = common::kpp_operator();
    let w = normalized_wronskian(op, SpectralPoint::at(C::new(0.0, 0.0)), 0.0, &opts()).unwrap();
    assert!(w.norm() > 1e-3, "{w}");
}

#[test]
fn wronskian_constancy_identity() {
    let op = common::kpp_operator();
    let ys = [-10.0, -5.0, -1.0, 0.0, 1.0, 5.0, 10.0];
    for lambda in small_lambdas() {
        let p = SpectralPoint::at(lambda);
        let w0 = wronskian(op, p, 0.0, &opts()).unwrap();
        for &y in &ys {
            let w = wronskian(op, p, y, &opts()).unwrap();
            let om = op.params.weight.value(y);
            let scaled = w * om * om * (C_STAR * y).exp();
            assert!((scaled - w0).norm() < 1e-6 * w0.norm(), "lambda {lambda} y {y}: {scaled} vs {w0}");
            if y >= 1.0 {
                assert!((w - w0).norm() < 1e-6 * w0.norm());
            }
            if y <= -1.0 {
                let pred = w0 * (-(C_STAR + 2.0 * BETA) * y).exp();
                assert!((w - pred).norm() < 1e-6 * pred.norm());
            }
        }
    }
}

#[test]
fn growth_determinant_is_two_sqrt_lambda() {
    let op = common::kpp_operator();
    let lambda = C::new(0.04, 0.0);
    let a = aux_determinants(op, SpectralPoint::at(lambda), 2.0, &opts()).unwrap();
    assert!((a.j - C::new(0.4, 0.0)).norm() < 1e-6, "{}", a.j);
    let lambda = C::new(0.05, 0.12);
    let s = lambda.sqrt();
    for y in [1.0, 3.0, 10.0] {
        let a = aux_determinants(op, SpectralPoint::at(lambda), y, &opts()).unwrap();
        assert!((a.j - 2.0 * s).norm() < 1e-6 * s.norm(), "y {y}: {}", a.j);
    }
}

#[test]
fn left_determinants_scale_with_the_weight() {
    let op = common::kpp_operator();
    let p = SpectralPoint::at(C::new(0.1, 0.1));
    // Both modes are dominated by the mu- exponential on the left, so K
    // loses about e^{(mu+ - mu-)|y|} digits to cancellation; tighten the
    // integrator accordingly.
    let tight = ModeOptions { rtol: 1e-13, ..opts() };
    let k0 = aux_determinants(op, p, 0.0, &tight).unwrap().k;
    for y in [-1.0, -2.0, -3.0] {
        let k = aux_determinants(op, p, y, &tight).unwrap().k;
        let pred = k0 * (-(C_STAR + 2.0 * BETA) * y).exp();
        assert!((k - pred).norm() < 1e-6 * pred.norm(), "y {y}: {k} vs {pred}");
    }
    let scaled: Vec<f64> = (0..=20)
        .map(|i| {
            let x = -(i as f64);
            aux_determinants(op, p, x, &opts()).unwrap().h.norm() * ((C_STAR + 2.0 * BETA) * x).exp()
        })
        .collect();
    let (lo, hi) = scaled.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &v| (a.min(v), b.max(v)));
    assert!(lo > 0.0 && hi / lo < 1e3, "{scaled:?}");
}

#[test]
fn no_zeros_in_unstable_rectangle() {
    let op = common::kpp_operator();
    let contour = rectangle_contour((0.05, 2.0), (-1.0, 1.0), 96);
    assert_eq!(no_unstable_spectrum_scan(op, &contour, &opts()).unwrap(), 0);
    let fine = rectangle_contour((0.05, 2.0), (-1.0, 1.0), 192);
    assert_eq!(no_unstable_spectrum_scan(op, &fine, &opts()).unwrap(), 0);
}

#[test]
fn winding_counts_a_known_zero() {
    let contour = rectangle_contour((0.05, 2.0), (-1.0, 1.0), 96);
    let vals: Vec<C> = contour.iter().map(|l| l - 0.5).collect();
    assert_eq!(winding_number(&vals).unwrap(), 1);
    let vals: Vec<C> = contour.iter().map(|l| (l - 0.5) * (l - C::new(1.0, 0.5))).collect();
    assert_eq!(winding_number(&vals).unwrap(), 2);
    let vals: Vec<C> = contour.iter().map(|l| l + 1.0).collect();
    assert_eq!(winding_number(&vals).unwrap(), 0);
}

#[test]
fn coarse_contour_is_flagged() {
    let contour = rectangle_contour((-1.0, 1.0), (-1.0, 1.0), 5);
    let vals: Vec<C> = contour.iter().map(|l| l.powi(3)).collect();
    assert!(matches!(winding_number(&vals), Err(EvansError::InsufficientResolution { .. })));
}

#[test]
fn inverse_wronskian_is_bounded_on_small_set() {
    let op = common::kpp_operator();
    let mut worst: f64 = 0.0;
    for lambda in small_lambdas() {
        for y in [-1.0, 0.0, 1.0, 5.0] {
            let w = wronskian(op, SpectralPoint::at(lambda), y, &opts()).unwrap();
            worst = worst.max(1.0 / w.norm());
        }
    }
    assert!(worst.is_finite() && worst < 10.0, "max 1/|W| = {worst}");
}

#[test]
fn wronskian_respects_conjugation() {
    let op = common::kpp_operator();
    for lambda in small_lambdas() {
        let a = wronskian(op, SpectralPoint::at(lambda), 0.7, &opts()).unwrap();
        let b = wronskian(op, SpectralPoint::at(lambda.conj()), 0.7, &opts()).unwrap();
        assert!((a.conj() - b).norm() < 1e-10 * a.norm(), "{lambda}");
    }
}
