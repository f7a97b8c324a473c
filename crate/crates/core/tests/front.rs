use kpp_core::front::{derivative_mode, fit_tail_samples, solve_front, FrontProfile, FrontSolver};
use kpp_core::model::{ModelParams, Nonlinearity, DEFAULT_ALPHA, DEFAULT_BETA};
use kpp_core::numeric::ode::Dopri5;
use num_complex::Complex64;

fn kpp() -> (Nonlinearity<f64>, ModelParams<f64>) {
    let nl = Nonlinearity::Kpp;
    let m = ModelParams::for_nonlinearity(&nl, DEFAULT_BETA, DEFAULT_ALPHA).unwrap();
    (nl, m)
}

fn default_front() -> FrontProfile {
    let (nl, m) = kpp();
    solve_front(&nl, &m, -60.0, 60.0, 0.02).unwrap()
}

/// Shooting oracle: integrate the front ODE along the unstable manifold of
/// `q = 1`, then translate so that `q(0) = 1/2`. Returns samples on `xs`.
fn shooting_front(xs: &[f64]) -> Vec<f64> {
    let c = 2.0;
    let r = -1.0 + 2f64.sqrt();
    let eps = 1e-9;
    let solver = Dopri5 { normalize: false, h_max: 0.05, ..Dopri5::new(1e-13) };
    let rhs = |_x: f64, y: &[Complex64; 2]| {
        let q = y[0].re;
        [y[1], Complex64::new(-c * y[1].re - q * (1.0 - q), 0.0)]
    };
    let y0 = [Complex64::new(1.0 - eps, 0.0), Complex64::new(-r * eps, 0.0)];
    // First pass: locate the crossing of 1/2.
    let probe: Vec<f64> = (1..=8000).map(|i| i as f64 * 0.01).collect();
    let mut vals = vec![0.0; probe.len()];
    solver.integrate(rhs, 0.0, y0, &probe, |i, _x, _s, y| vals[i] = y[0].re).unwrap();
    let k = vals.iter().position(|&v| v < 0.5).unwrap();
    let (x1, x2, v1, v2) = (probe[k - 1], probe[k], vals[k - 1], vals[k]);
    let mut shift = x1 + (0.5 - v1) * (x2 - x1) / (v2 - v1);
    // Newton refinement of the crossing.
    for _ in 0..3 {
        let (mut v, mut d) = (0.0, 0.0);
        solver
            .integrate(rhs, 0.0, y0, &[shift], |_i, _x, _s, y| (v, d) = (y[0].re, y[1].re))
            .unwrap();
        shift -= (v - 0.5) / d;
    }
    let stops: Vec<f64> = xs.iter().map(|x| x + shift).collect();
    let mut out = vec![0.0; xs.len()];
    solver.integrate(rhs, 0.0, y0, &stops, |i, _x, _s, y| out[i] = y[0].re).unwrap();
    out
}

#[test]
fn default_front_meets_quality_targets() {
    let p = default_front();
    assert!(p.residual < 1e-8, "residual {}", p.residual);
    assert!(p.q[0] > 1.0 - 1e-6);
    assert!(*p.q.last().unwrap() < 1e-10);
    assert!(p.q.windows(2).all(|w| w[1] <= w[0]));
    assert!(p.tail.fit_err < 1e-4, "fit_err {}", p.tail.fit_err);
    assert!(p.tail.b > 0.0);
    assert!(p.iterations < 20);
    assert!((p.q_at(0.0) - 0.5).abs() < 1e-15);
}

#[test]
fn front_is_independent_of_initial_guess() {
    let (nl, m) = kpp();
    let base = default_front();
    for w in [0.5, 2.0, 4.0] {
        let s = FrontSolver { initial_width: w, ..Default::default() };
        let p = s.solve(&nl, &m, -60.0, 60.0, 0.02).unwrap();
        let d = p.q.iter().zip(&base.q).fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
        assert!(d < 1e-8, "width {w}: {d}");
    }
}

#[test]
fn grid_refinement_is_second_order() {
    let (nl, m) = kpp();
    let xs: Vec<f64> = (-40..=40).map(|i| i as f64 * 0.5).collect();
    let oracle = shooting_front(&xs);
    let mut errs = Vec::new();
    for h in [0.04, 0.02, 0.01] {
        let p = solve_front(&nl, &m, -60.0, 60.0, h).unwrap();
        let e = xs.iter().zip(&oracle).fold(0.0f64, |a, (&x, &o)| a.max((p.q_at(x) - o).abs()));
        errs.push(e);
    }
    let order1 = (errs[0] / errs[1]).log2();
    let order2 = (errs[1] / errs[2]).log2();
    assert!((order1 - 2.0).abs() < 0.2 && (order2 - 2.0).abs() < 0.2, "{errs:?}");
    assert!(errs[1] < 1e-4, "{errs:?}");
}

#[test]
fn tail_coefficients_match_shooting_oracle() {
    let p = default_front();
    let xs: Vec<f64> = (0..=100).map(|i| 20.0 + i as f64 * 0.1).collect();
    let q = shooting_front(&xs);
    let fit = fit_tail_samples(&xs, &q, 1.0, 0.0, 1e-4).unwrap();
    assert!((fit.b - p.tail.b).abs() < 2e-3 * fit.b, "{} vs {}", fit.b, p.tail.b);
    assert!((fit.a - p.tail.a).abs() < 2e-3 * fit.a.abs(), "{} vs {}", fit.a, p.tail.a);
}

#[test]
fn derivative_mode_asymptotics() {
    let (_, m) = kpp();
    let p = default_front();
    let d = derivative_mode(&p, &m.weight);
    let at = |x: f64| {
        let i = d.x.iter().position(|&v| (v - x).abs() < 1e-9).unwrap();
        d.v[i]
    };
    // Linear growth on the right with slope -gamma* b. The grid splits the
    // double root by O(h), which bends the line by O((h x)^2), so stay at
    // moderate x.
    let slope = (at(12.0) - at(10.0)) / 2.0;
    assert!((slope + p.tail.b).abs() < 1e-2 * p.tail.b, "slope {slope}");
    // Exponential decay on the left at rate r - beta.
    let rate = (at(-20.0) / at(-30.0)).ln() / 10.0;
    assert!((rate - (p.left_rate - DEFAULT_BETA)).abs() < 1e-4, "rate {rate}");
    assert!(d.v.iter().all(|v| *v < 0.0 || v.abs() < 1e-300));
}
