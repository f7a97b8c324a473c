mod common;

use kpp_core::green_lambda::*;
use kpp_core::modes::{ModeOptions, SpectralPoint};
use kpp_core::operator::{heat_resolvent, Coefficients, HeatOperator};
use num_complex::Complex64 as C;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn opts() -> ModeOptions {
    ModeOptions::default()
}

/// Random `(lambda, y)` with `lambda` in the small region, off the cut.
fn random_pairs(seed: u64, n: usize) -> Vec<(C, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let r = rng.gen_range(0.05..0.5);
            let arg = rng.gen_range(-2.6..2.6);
            (C::from_polar(r, arg), rng.gen_range(-5.0..5.0))
        })
        .collect()
}

#[test]
fn heat_closed_form() {
    let heat = HeatOperator;
    for lambda in [C::new(0.3, 1.0), C::new(0.01, -0.02), C::new(-2.0, 5.0), C::new(40.0, 3.0)] {
        for (x, y) in [(1.0, -2.0), (-3.0, 0.5), (0.0, 0.0), (7.0, 6.5)] {
            let g = green_lambda(&heat, SpectralPoint::at(lambda), x, y, &opts()).unwrap();
            let want = heat_resolvent(lambda, x, y);
            assert!((g - want).norm() < 1e-8 * want.norm(), "{lambda} {x} {y}: {g} vs {want}");
        }
    }
}

#[test]
fn continuity_and_unit_jump() {
    let op = common::kpp_operator();
    for (lambda, y) in random_pairs(7, 10) {
        let nodes = [y - 1e-3, y, y + 1e-3];
        let r = Resolvent::new(op, SpectralPoint::at(lambda), &nodes, &opts()).unwrap();
        // Both one-sided formulas at the diagonal.
        let d = r.phi_plus.value(1)[0] * r.phi_minus.value(1)[0] / r.wronskian(1);
        assert!((r.green(1, 1) - d).norm() < 1e-8 * d.norm());
        let jump = r.green_dx(1, 1, true) - r.green_dx(1, 1, false);
        assert!((jump + 1.0).norm() < 1e-6, "{lambda} {y}: jump {jump}");
        // Continuity across the diagonal at the node spacing.
        let left = r.green(0, 1);
        let right = r.green(2, 1);
        assert!((left - right).norm() < 1e-2 * d.norm() + 3e-3);
    }
}

#[test]
fn finite_difference_residual() {
    let op = common::kpp_operator();
    let h = 1e-3;
    for (lambda, y) in random_pairs(11, 10) {
        let mut nodes = Vec::new();
        for x in [-6.0, -2.5, -0.7, 0.4, 1.8, 5.0] {
            let x = y + x;
            nodes.extend([x - h, x, x + h]);
        }
        nodes.push(y);
        nodes.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let r = Resolvent::new(op, SpectralPoint::at(lambda), &nodes, &opts()).unwrap();
        let j = nodes.iter().position(|&v| v == y).unwrap();
        for k in 0..nodes.len() {
            if k == 0 || k + 1 >= nodes.len() || nodes[k + 1] - nodes[k] > 1.5 * h || nodes[k] - nodes[k - 1] > 1.5 * h {
                continue;
            }
            let x = nodes[k];
            let (gm, g0, gp) = (r.green(k - 1, j), r.green(k, j), r.green(k + 1, j));
            let res = (gp - 2.0 * g0 + gm) / (h * h) + op.zeta1(x) * (gp - gm) / (2.0 * h) + (op.zeta0(x) - lambda) * g0;
            assert!(res.norm() < 1e-5, "{lambda} y {y} x {x}: residual {}", res.norm());
        }
    }
}

#[test]
fn discrete_oracle_reproduces_heat_kernel() {
    let heat = HeatOperator;
    let lambda = C::new(0.2, 0.3);
    let (xs, g) = discrete_resolvent(&heat, lambda, 0.5, 0.005, 4000, 4000).unwrap();
    for (x, v) in xs.iter().zip(&g).step_by(400) {
        let want = heat_resolvent(lambda, *x, 0.5);
        assert!((v - want).norm() < 1e-4 * want.norm(), "x {x}: {v} vs {want}");
    }
}

#[test]
fn matches_discrete_resolvent_oracle() {
    let op = common::kpp_operator();
    let h = 0.005;
    for (lambda, y) in random_pairs(2024, 10) {
        let n_left = ((y + 70.0) / h) as usize;
        let n_right = ((70.0 - y) / h) as usize;
        let (xs, g) = discrete_resolvent(op, lambda, y, h, n_left, n_right).unwrap();
        let sample: Vec<usize> = (0..xs.len()).filter(|&k| (xs[k] - y).abs() <= 10.0).step_by(100).collect();
        let nodes: Vec<f64> = sample.iter().map(|&k| xs[k]).collect();
        let r = Resolvent::new(op, SpectralPoint::at(lambda), &nodes, &opts()).unwrap();
        let j = nodes.iter().position(|&v| v == y).unwrap();
        for (i, &k) in sample.iter().enumerate() {
            let a = r.green(i, j);
            assert!((a - g[k]).norm() < 1e-4 * a.norm(), "{lambda} y {y} x {}: {a} vs {}", xs[k], g[k]);
        }
    }
}

fn small_ray(theta: f64) -> Vec<C> {
    [0.4, 0.1, 0.025, 0.006, 0.0015].iter().map(|&r| C::from_polar(r, theta)).collect()
}

#[test]
fn small_lambda_envelopes_are_bounded() {
    let op = common::kpp_operator();
    let nodes: Vec<f64> = (-20..=20).map(|i| i as f64).collect();
    let mut lambdas = small_ray(std::f64::consts::FRAC_PI_4);
    lambdas.extend(small_ray(-2.0));
    lambdas.extend(small_ray(2.7));
    let bounds = verify_small_lambda_bounds(op, &op.params, &lambdas, &nodes, &opts()).unwrap();
    for b in &bounds {
        assert!(b.samples > 0 && b.max_ratio_uniform < 100.0, "{b:?}");
        match b.regime {
            // phi- grows like 1 + y on the right at the branch point, so an
            // e^{-alpha y} gain is not available there.
            Regime::III | Regime::IV => assert!(b.max_ratio > 1e4, "{b:?}"),
            _ => assert!(b.max_ratio < 100.0, "{b:?}"),
        }
    }
}

#[test]
fn right_half_line_kernel_grows_linearly_at_branch_point() {
    let op = common::kpp_operator();
    let nodes: Vec<f64> = (0..=20).map(|i| i as f64).collect();
    let r = Resolvent::new(op, SpectralPoint::at(C::new(1e-6, 1e-6)), &nodes, &opts()).unwrap();
    // G(y, y) for 1 <= y << |lambda|^{-1/2}: affine in y with a nonzero slope.
    let g: Vec<f64> = (10..=20).map(|i| r.green(i, i).re).collect();
    let slope = (g[10] - g[0]) / 10.0;
    assert!(slope > 0.5, "{g:?}");
    assert!((g[5] - (g[0] + g[10]) / 2.0).abs() < 2e-2 * g[10], "{g:?}");
}

#[test]
fn envelopes_do_not_blow_up_at_branch_point() {
    let op = common::kpp_operator();
    let nodes: Vec<f64> = (-10..=10).map(|i| i as f64 * 2.0).collect();
    let ratios: Vec<f64> = small_ray(std::f64::consts::FRAC_PI_4)
        .into_iter()
        .map(|l| {
            let b = verify_small_lambda_bounds(op, &op.params, &[l], &nodes, &opts()).unwrap();
            b.iter().fold(0.0f64, |m, r| m.max(r.max_ratio_uniform))
        })
        .collect();
    let last = *ratios.last().unwrap();
    assert!(last <= 2.0 * ratios[0] && last <= 2.0 * ratios[ratios.len() - 2], "{ratios:?}");
}

#[test]
fn heat_large_lambda_constants() {
    let heat = HeatOperator;
    let pairs: Vec<(f64, f64)> = (0..=8).map(|i| (i as f64 * 0.5, 0.0)).collect();
    for lambda in [C::new(30.0, 0.0), C::new(5.0, 40.0), C::new(-3.0, 60.0)] {
        let fit = verify_large_lambda_bound(&heat, &[lambda], &pairs, &opts()).unwrap();
        let eta = (lambda / lambda.norm()).sqrt().re;
        assert!((fit.eta - eta).abs() < 1e-9, "{} vs {eta}", fit.eta);
        assert!((fit.c - 0.5).abs() < 1e-9, "{}", fit.c);
    }
}

#[test]
fn kpp_large_lambda_bounds() {
    let op = common::kpp_operator();
    let pairs: Vec<(f64, f64)> = (-8..=8)
        .flat_map(|i| {
            let y = i as f64;
            (0..=8).map(move |k| (y + k as f64 * 0.5, y))
        })
        .collect();
    let fit = verify_large_lambda_bound(op, &[C::new(25.0, 0.0)], &pairs, &opts()).unwrap();
    assert!(fit.c < 5.0 && fit.eta > 0.0, "{fit:?}");
    let fit = verify_large_lambda_bound(op, &[C::new(0.0, 100.0)], &pairs, &opts()).unwrap();
    assert!(fit.eta > 0.0, "{fit:?}");
}

#[test]
fn green_respects_conjugation() {
    let op = common::kpp_operator();
    for (lambda, y) in random_pairs(5, 6) {
        let a = green_lambda(op, SpectralPoint::at(lambda), y + 1.3, y, &opts()).unwrap();
        let b = green_lambda(op, SpectralPoint::at(lambda.conj()), y + 1.3, y, &opts()).unwrap();
        assert!((a.conj() - b).norm() < 1e-10 * a.norm());
    }
}
