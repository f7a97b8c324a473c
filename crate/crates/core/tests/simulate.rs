mod common;

use kpp_core::laplace::ContourParams;
use kpp_core::model::Nonlinearity;
use kpp_core::modes::ModeOptions;
use kpp_core::operator::HeatOperator;
use kpp_core::simulate::*;

fn heat_error(h: f64, dt: f64) -> f64 {
    let o = SimOptions { xmin: -20.0, xmax: 20.0, h, dt, ..Default::default() };
    let sim = Simulator::linear(&HeatOperator, &o).unwrap();
    let mut s = sim.state_from(|x| (-x * x).exp()).unwrap();
    sim.run(&mut s, 1.0, &[], |_| {}).unwrap();
    (0..sim.grid.n)
        .map(|i| {
            let x = sim.grid.x(i);
            (s.p[i] - (-x * x / 5.0).exp() / 5f64.sqrt()).abs()
        })
        .fold(0.0, f64::max)
}

#[test]
fn heat_gaussian_matches_closed_form() {
    assert!(heat_error(0.005, 0.0025) < 1e-6);
}

#[test]
fn second_order_convergence() {
    let e: Vec<f64> = [(0.02, 0.01), (0.01, 0.005), (0.005, 0.0025)].iter().map(|&(h, dt)| heat_error(h, dt)).collect();
    for w in e.windows(2) {
        let order = (w[0] / w[1]).log2();
        assert!((order - 2.0).abs() < 0.2, "{e:?}");
    }
}

#[test]
fn zero_data_stays_zero() {
    let op = common::kpp_operator();
    let o = SimOptions::default();
    for sim in [Simulator::linear(op, &o).unwrap(), Simulator::nonlinear(op, &o).unwrap()] {
        let mut s = sim.state(vec![0.0; sim.grid.n]).unwrap();
        sim.run(&mut s, 1.0, &[], |_| {}).unwrap();
        assert!(s.p.iter().all(|v| *v == 0.0));
    }
}

#[test]
fn kpp_forcing_is_minus_omega_p_squared() {
    let op = common::kpp_operator();
    let sim = Simulator::nonlinear(op, &SimOptions::default()).unwrap();
    let p = sim.grid.sample(|x| 0.01 * (-x * x).exp());
    let (_, omega) = sim.background().unwrap();
    for ((f, p), w) in sim.forcing(&p).iter().zip(&p).zip(omega) {
        assert!((f + w * p * p).abs() <= 1e-15 * (w * p * p).max(1e-300));
    }
    let cubic = Nonlinearity::<f64>::Cubic;
    for mu in [0.1, 0.5, 0.9] {
        let nu = 1e-9;
        assert!((cubic.remainder(mu, nu) / nu - cubic.d2f(mu) / 2.0).abs() < 1e-12);
    }
}

#[test]
fn rejects_unstable_setups() {
    let op = common::kpp_operator();
    let big = SimOptions { dt: 1.0, ..Default::default() };
    assert!(matches!(Simulator::linear(op, &big), Err(SimError::Stability { .. })));
    assert!(matches!(Grid::new(0.0, 1.0, 0.3), Err(SimError::Grid(_))));
    // Overflowing data trips the growth detector.
    let o = SimOptions { xmin: -5.0, xmax: 5.0, ..Default::default() };
    let sim = Simulator::linear(&HeatOperator, &o).unwrap();
    let mut p = vec![0.0; sim.grid.n];
    p[250] = 1e308;
    let mut s = sim.state(p).unwrap();
    assert!(matches!(sim.step(&mut s), Err(SimError::Unstable { .. })));
}

#[test]
fn guard_band_violation() {
    let op = common::kpp_operator();
    let sim = Simulator::nonlinear(op, &SimOptions::default()).unwrap();
    assert!(matches!(sim.state_from(|x| 0.7 * (-x * x).exp()), Err(SimError::GuardBand { .. })));
}

#[test]
fn weighted_and_unweighted_formulations_agree() {
    // On the grid of the computed front, q is a discrete steady state of
    // the unweighted scheme.
    let op = common::kpp_operator();
    let o = SimOptions { xmin: -60.0, xmax: 60.0, ..Default::default() };
    let w = Simulator::nonlinear(op, &o).unwrap();
    let f = Simulator::full(op, &o).unwrap();
    let mut sp = w.state_from(|x| 0.01 * (-x * x).exp()).unwrap();
    let (q, om) = f.background().unwrap();
    let (q, om) = (q.to_vec(), om.to_vec());
    let u0: Vec<f64> = (0..q.len()).map(|i| q[i] + om[i] * sp.p[i]).collect();
    let mut su = f.state(u0).unwrap();
    for t in [1.0, 5.0] {
        w.run(&mut sp, t, &[], |_| {}).unwrap();
        f.run(&mut su, t, &[], |_| {}).unwrap();
        for i in 0..q.len() {
            if f.grid.x(i) > 50.0 {
                continue;
            }
            let p = (su.p[i] - q[i]) / om[i];
            assert!((p - sp.p[i]).abs() < 1e-6, "t {t} x {}: {p} vs {}", f.grid.x(i), sp.p[i]);
        }
    }
}

#[test]
fn comparison_principle() {
    let op = common::kpp_operator();
    let o = SimOptions { xmin: -60.0, xmax: 60.0, ..Default::default() };
    let f = Simulator::full(op, &o).unwrap();
    let q = f.background().unwrap().0.to_vec();
    for bump in [0.3, -0.3] {
        let u0: Vec<f64> = (0..q.len()).map(|i| (q[i] + bump * (-f.grid.x(i).powi(2)).exp()).clamp(0.0, 1.0)).collect();
        let mut s = f.state(u0).unwrap();
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        f.run(&mut s, 10.0, &[], |s| {
            for v in &s.p {
                lo = lo.min(*v);
                hi = hi.max(*v);
            }
        })
        .unwrap();
        assert!(lo >= -1e-12 && hi <= 1.0 + 1e-12, "range [{lo}, {hi}]");
    }
}

#[test]
fn omega_constant_closed_form() {
    let op = common::kpp_operator();
    let beta = op.params.beta;
    // Left branch (1 + |x|) e^{beta x} peaks at |x| = 1/beta - 1; the right
    // branch (1 + x) e^{-gamma x} and the bridge stay below it.
    let left = (1.0 / beta) * (-(1.0 - beta)).exp();
    assert!((omega_const(op) - left).abs() < 1e-9, "{} vs {left}", omega_const(op));
    assert!(2.0 * (-op.params.gamma_star).exp() < left);
}

#[test]
fn decay_experiment() {
    let op = common::kpp_operator();
    let samples = default_sample_times(200.0, 40);
    let o = SimOptions::default();
    let r = run_decay_experiment(op, &|x| 0.01 * (-x * x).exp(), 200.0, &samples, &o).unwrap();
    let theta = |t: f64| r.theta_series.iter().find(|p| (p.0 - t).abs() < 5e-3).unwrap().1;
    assert!(r.theta_series.windows(2).all(|w| w[1].1 >= w[0].1));
    let last = r.theta_series.last().unwrap();
    assert!((last.0 - 200.0).abs() < 1e-9 && last.1 <= 3.0 * theta(1.0), "{:?}", r.theta_series);
    assert!((r.slope + 1.5).abs() < 0.15, "slope {}", r.slope);
    assert!(r.boundary_ok, "boundary {}", r.boundary_max);
    assert!(r.chi_ratio <= 1.0 + 1e-12, "chi ratio {}", r.chi_ratio);
    assert!((r.initial.sup - 0.01).abs() < 1e-15);
    // int (1 + |x|) 0.01 e^{-x^2} = 0.01 (sqrt(pi) + 1); the kink of |x|
    // limits the trapezoid rule to O(h^2).
    assert!((r.initial.weighted_l1 - 0.01 * (std::f64::consts::PI.sqrt() + 1.0)).abs() < 1e-6);

    let r2 = run_decay_experiment(op, &|x| 0.02 * (-x * x).exp(), 200.0, &samples, &o).unwrap();
    let at = |r: &DecayReport, t: f64| *r.history.iter().min_by(|a, b| (a.t - t).abs().partial_cmp(&(b.t - t).abs()).unwrap()).unwrap();
    let (a, b) = (at(&r, 50.0), at(&r2, 50.0));
    assert!((b.theta / a.theta - 2.0).abs() < 0.2 && (b.weighted_sup / a.weighted_sup - 2.0).abs() < 0.2, "{a:?} {b:?}");
}

#[test]
fn slope_is_stable_under_refinement() {
    let op = common::kpp_operator();
    let samples = default_sample_times(200.0, 40);
    let p0 = |x: f64| 0.01 * (-x * x).exp();
    let coarse = run_decay_experiment(op, &p0, 200.0, &samples, &SimOptions::default()).unwrap();
    let fine = run_decay_experiment(op, &p0, 200.0, &samples, &SimOptions { h: 0.01, dt: 0.005, ..Default::default() }).unwrap();
    assert!((coarse.slope - fine.slope).abs() < 0.02, "{} vs {}", coarse.slope, fine.slope);
}

#[test]
fn rejects_data_outside_unit_interval() {
    let op = common::kpp_operator();
    let r = run_decay_experiment(op, &|x| -0.09 * (-(x - 30.0).powi(2)).exp() * 1e12, 1.0, &[], &SimOptions::default());
    assert!(matches!(r, Err(SimError::InitialData(_)) | Err(SimError::GuardBand { .. })));
}

#[test]
fn duhamel_identity() {
    let op = common::kpp_operator();
    let o = SimOptions::default();
    let p = ContourParams::default();
    let m = ModeOptions::default();
    let lin = Simulator::linear(op, &o).unwrap();
    let traj = Trajectory::record(&lin, lin.grid.sample(|x| 0.01 * (-x * x).exp()), 5.0, 0.05).unwrap();
    let r = duhamel_residual(op, &traj, 5.0, 5, &p, &m).unwrap();
    assert!(r.residual < 2e-3, "{r:?}");
    let non = Simulator::nonlinear(op, &o).unwrap();
    let traj = Trajectory::record(&non, non.grid.sample(|x| 0.01 * (-x * x).exp()), 5.0, 0.05).unwrap();
    for t in [0.5, 5.0] {
        let r = duhamel_residual(op, &traj, t, 5, &p, &m).unwrap();
        assert!(r.residual < 5e-3, "{r:?}");
    }
}

#[test]
fn heat_duhamel_is_exact_for_linear_runs() {
    let o = SimOptions { xmin: -30.0, xmax: 30.0, h: 0.005, dt: 0.0025, ..Default::default() };
    let sim = Simulator::linear(&HeatOperator, &o).unwrap();
    let traj = Trajectory::record(&sim, sim.grid.sample(|x| (-x * x).exp()), 1.0, 0.25).unwrap();
    let r = duhamel_residual(&HeatOperator, &traj, 1.0, 4, &ContourParams::for_speed(0.0), &ModeOptions::default()).unwrap();
    assert!(r.abs_residual < 1e-6, "{r:?}");
}

#[test]
fn pde_reproduces_contour_green_function() {
    let op = common::kpp_operator();
    let r = cross_check_green(op, -2.0, 0.1, &[5.0], &SimOptions::default(), &ContourParams::default(), &ModeOptions::default()).unwrap();
    assert!(r[0].rel_error < 1e-3, "{r:?}");
}

#[test]
fn convolution_inequality() {
    assert_eq!(convolution_integral(0.0).0, 0.0);
    let (v, err) = convolution_integral(1.0);
    // Independent reference: composite Simpson on a fine grid.
    let n = 200_000;
    let f = |s: f64| (2.0 - s).powf(-1.5) * (1.0 + s).powi(-3);
    let h = 1.0 / n as f64;
    let simpson: f64 = (0..=n).map(|i| f(i as f64 * h) * if i == 0 || i == n { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 }).sum::<f64>() * h / 3.0;
    assert!((v - simpson).abs() < 1e-10 && err < 1e-10, "{v} vs {simpson}");
    let c = convolution_inequality_check(&[1.0, 10.0, 100.0, 1000.0]);
    assert!(c.sup_scaled.is_finite() && c.plateau_change < 0.05, "{c:?}");
}
