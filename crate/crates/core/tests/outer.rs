mod common;

use approx::assert_abs_diff_eq;
use common::params;
use domainwall::dynamics::{first_integral, singular_right_b, State, M_MINUS, M_PLUS};
use domainwall::error::Error;
use domainwall::integrate::{integrate, Crossing, EventSpec, IntegratorConfig};
use domainwall::outer::*;
use domainwall::params::{ScalingConfig, ScalingOptions};
use proptest::prelude::*;

/// A regime small enough in epsilon that the left section exists.
fn left_section_regime() -> (domainwall::params::Params, ScalingConfig) {
    let p = params(0.001, 2.0);
    let cfg = ScalingConfig::defaults(&p).unwrap();
    assert!(cfg.b00.is_some());
    (p, cfg)
}

#[test]
fn left_profile_shift_at_unit_delta() {
    let p = params(0.1, 2.0);
    let x0 = left_profile_shift(0.5, &p);
    assert_abs_diff_eq!(x0.cosh(), 1.6329932, epsilon = 1e-7);
    // acosh c = ln(c + sqrt(c^2 - 1)) with c = 2 sqrt(2/3).
    let c = 2.0 * (2.0f64 / 3.0).sqrt();
    assert_abs_diff_eq!(x0, (c + (c * c - 1.0).sqrt()).ln(), epsilon = 1e-14);
    assert_abs_diff_eq!(x0, 1.0729483, epsilon = 1e-7);
}

#[test]
fn left_profile_boundary_value_and_limit() {
    let p = params(0.1, 2.0);
    let x_star = 30.0;
    assert_abs_diff_eq!(b0_left_profile(-x_star, x_star, 0.5, &p).unwrap(), 0.5, epsilon = 1e-14);
    assert!(b0_left_profile(-1e4, x_star, 0.5, &p).unwrap() < 1e-12);
    let xs: Vec<f64> = (0..200).map(|i| -x_star - i as f64).collect();
    let bs: Vec<f64> = xs.iter().map(|x| b0_left_profile(*x, x_star, 0.5, &p).unwrap()).collect();
    assert!(bs.windows(2).all(|w| w[1] < w[0]));
}

#[test]
fn left_profile_rejects_out_of_range_section_values() {
    let p = params(0.1, 2.0);
    for b00 in [0.0, -0.1, 0.71, 1.0, f64::NAN] {
        assert!(matches!(b0_left_profile(-30.0, 30.0, b00, &p), Err(Error::Domain(_))), "B00 = {b00}");
    }
}

#[test]
fn left_profile_solves_the_reduced_equation() {
    // B'' = eps^2 B (delta^2 - (g^2 - 1) B^2) is the slow equation on the left branch.
    for (eps, g) in [(0.1, 2.0), (0.05, 1.5)] {
        let p = params(eps, g);
        let f = |x: f64| b0_left_profile(x, 20.0, 0.4, &p).unwrap();
        let h = 1e-2;
        for x in [-25.0, -60.0, -120.0] {
            let bpp = (f(x + h) - 2.0 * f(x) + f(x - h)) / (h * h);
            let b = f(x);
            let rhs = eps * eps * b * (p.delta.powi(2) - (g * g - 1.0) * b * b);
            assert!((bpp - rhs).abs() < 1e-8, "x = {x}: {bpp} vs {rhs}");
        }
    }
}

#[test]
fn right_profile_phase_and_limit() {
    let p = params(0.1, 2.0);
    assert_abs_diff_eq!(1.0 + v_right_profile(0.0, &p), 0.7071068, epsilon = 1e-7);
    assert_abs_diff_eq!(v_right_profile(1e4, &p), 0.0, epsilon = 1e-14);
}

#[test]
fn right_profile_matches_the_singular_branch() {
    for (eps, g) in [(0.1, 2.0), (0.05, 1.3)] {
        let p = params(eps, g);
        for x in [0.0, 5.0, 20.0, 80.0] {
            assert_abs_diff_eq!(1.0 + v_right_profile(x, &p), singular_right_b(x, &p), epsilon = 1e-14);
        }
    }
    // Value at x = 5 for unit delta and eps = 0.1, from the first-order reduction
    // B' = eps (1 - B^2) / sqrt 2 with B(0) = 1/sqrt 2.
    let p = params(0.1, 2.0);
    let t = (0.5f64 / 2f64.sqrt()).tanh();
    let expected = (1.0 / 2f64.sqrt() + t) / (1.0 + t / 2f64.sqrt()) - 1.0;
    assert_abs_diff_eq!(v_right_profile(5.0, &p), expected, epsilon = 1e-14);
    assert_abs_diff_eq!(v_right_profile(5.0, &p), -0.1559975, epsilon = 1e-7);
}

#[test]
fn unstable_seed_at_zero_tangent() {
    let (p, cfg) = left_section_regime();
    let b00 = cfg.b00.unwrap();
    let s = unstable_seed(&p, &cfg, [0.0, 0.0]).unwrap().state;
    let da = p.delta * cfg.alpha_minus;
    assert_abs_diff_eq!(s.a0(), da, epsilon = 1e-15);
    assert_abs_diff_eq!(s.a1(), -cfg.alpha_minus.powi(2) * p.delta * b00 / 2f64.sqrt(), epsilon = 1e-15);
    assert_eq!(s.a2(), 0.0);
    assert_eq!(s.a3(), 0.0);
    assert_eq!(s.b0(), b00);
    assert!(s.b1() >= 0.0);
    assert!(first_integral(&s, &p).abs() < 1e-12);
}

#[test]
fn unstable_seed_ball_boundary() {
    let (p, cfg) = left_section_regime();
    let radius = cfg.unstable_ball_radius(&p);
    assert_abs_diff_eq!(radius, 0.1 * 2f64.sqrt(), epsilon = 1e-15);
    let dir = [0.6, -0.8];
    let on = [radius * dir[0], radius * dir[1]];
    let seed = unstable_seed(&p, &cfg, on).unwrap();
    assert!(first_integral(&seed.state, &p).abs() < 1e-12);
    let out = [1.01 * on[0], 1.01 * on[1]];
    assert!(matches!(unstable_seed(&p, &cfg, out), Err(Error::BallViolation { .. })));
}

#[test]
fn unstable_seed_needs_a_left_section() {
    let p = params(0.1, 1.5);
    let cfg = ScalingConfig::defaults(&p).unwrap();
    assert!(cfg.b00.is_none());
    assert!(matches!(unstable_seed(&p, &cfg, [0.0, 0.0]), Err(Error::Domain(_))));
}

#[test]
fn stable_seed_examples() {
    let p = params(0.1, 1.5);
    let cfg = ScalingConfig::defaults(&p).unwrap();
    assert_eq!(ScalingOptions::default().k1, 0.05);
    let s = stable_seed(&p, &cfg, [0.0, 0.0]).unwrap().state;
    for j in 0..4 {
        assert_eq!(s[j], 0.0);
    }
    assert_eq!(s.b0(), cfg.b01);
    assert!(first_integral(&s, &p).abs() < 1e-12);

    let s = stable_seed(&p, &cfg, [0.05, 0.0]).unwrap().state;
    let da = p.delta * cfg.alpha_plus;
    let r = 2f64.sqrt();
    assert_abs_diff_eq!(s.a0(), 0.05 * da, epsilon = 1e-15);
    assert_abs_diff_eq!(s.a1(), -0.05 * da.powf(1.5) / r, epsilon = 1e-15);
    assert_eq!(s.a2(), 0.0);
    assert_abs_diff_eq!(s.a3(), 0.05 * da.powf(2.5) / r, epsilon = 1e-15);
    assert!(first_integral(&s, &p).abs() < 1e-12);
    assert!(matches!(stable_seed(&p, &cfg, [0.06, 0.0]), Err(Error::BallViolation { .. })));
}

#[test]
fn zero_level_rejects_states_above_it() {
    let p = params(0.1, 1.5);
    let s = State::new(0.0, 0.0, 5.0, 0.0, 0.3, 0.0);
    assert!(matches!(b1_on_zero_level(&s, &p), Err(Error::NegativeRadicand(_))));
}

#[test]
fn eigen_seed_with_zero_offset_is_the_equilibrium() {
    let p = params(0.1, 1.5);
    assert_eq!(eigen_seed_at_equilibrium(Equilibrium::Minus, [1.0, 0.5, 0.2], 0.0, &p), M_MINUS);
    assert_eq!(eigen_seed_at_equilibrium(Equilibrium::Plus, [1.0, 0.5, 0.2], 0.0, &p), M_PLUS);
    let t = integrate(M_PLUS, [0.0, 30.0], &p, &IntegratorConfig::default(), &[]).unwrap();
    assert!(t.states.iter().all(|s| *s == M_PLUS));
}

#[test]
fn eigen_basis_vectors_are_eigenvectors() {
    use domainwall::dynamics::jacobian;
    let p = params(0.1, 1.5);
    let m = 2f64.powf(-0.25);
    let q = (p.delta / 2.0).sqrt();
    for (which, eq, b_rate, a_re, a_im) in [
        (Equilibrium::Minus, M_MINUS, p.epsilon * p.delta, m, m),
        (Equilibrium::Plus, M_PLUS, -p.epsilon * 2f64.sqrt(), -q, q),
    ] {
        let j = jacobian(&eq, &p);
        let [vb, vr, vi] = eigen_basis(which, &p).map(|s| s.to_vector());
        assert!((j * vb - b_rate * vb).norm() < 1e-14);
        // J (vr + i vi) = (a_re + i a_im)(vr + i vi).
        assert!((j * vr - (a_re * vr - a_im * vi)).norm() < 1e-14);
        assert!((j * vi - (a_im * vr + a_re * vi)).norm() < 1e-14);
    }
}

#[test]
fn seed_at_the_left_equilibrium_grows_at_the_slow_rate() {
    let p = params(0.1, 1.5);
    let s0 = eigen_seed_at_equilibrium(Equilibrium::Minus, [1.0, 0.0, 0.0], 1e-6, &p);
    assert!(first_integral(&s0, &p).abs() < 1e-16);
    let cfg = IntegratorConfig::with_tolerances(1e-12, 1e-18);
    let t = integrate(s0, [0.0, 20.0], &p, &cfg, &[]).unwrap();
    let (b10, b20) = (t.state_at(10.0).b0(), t.state_at(20.0).b0());
    let rate = (b20 / b10).ln() / 10.0;
    let expected = p.epsilon * p.delta;
    assert!((rate / expected - 1.0).abs() < 0.02, "rate {rate}, expected {expected}");
}

#[test]
fn backward_seed_at_the_right_equilibrium_lowers_b() {
    let p = params(0.1, 1.5);
    let s0 = eigen_seed_at_equilibrium(Equilibrium::Plus, [1.0, 0.0, 0.0], -1e-4, &p);
    assert!(s0.b0() < 1.0);
    let t = integrate(s0, [0.0, -20.0], &p, &IntegratorConfig::with_tolerances(1e-12, 1e-15), &[]).unwrap();
    assert!(t.states.windows(2).all(|w| w[1].b0() < w[0].b0()));
    let rate = ((1.0 - t.last().b0()) / (1.0 - s0.b0())).ln() / 20.0;
    assert!((rate / (2f64.sqrt() * p.epsilon) - 1.0).abs() < 0.02, "rate {rate}");
}

#[test]
fn unstable_manifold_has_rising_b() {
    let p = params(0.1, 1.5);
    let s0 = eigen_seed_at_equilibrium(Equilibrium::Minus, [1.0, 0.0, 0.0], 1e-6, &p);
    let stop = [EventSpec::hyperplane(4, 0.5, Crossing::Rising, true)];
    let t = integrate(s0, [0.0, 400.0], &p, &IntegratorConfig::with_tolerances(1e-12, 1e-18), &stop).unwrap();
    assert_eq!(t.events.len(), 1);
    assert!(t.states.iter().all(|s| s.b1() > 0.0));
}

#[test]
fn right_tail_decays_at_the_slow_rate() {
    let p = params(0.1, 1.5);
    let b0 = 1.0 / p.g.sqrt();
    let s0 = State::new(0.0, 0.0, 0.0, 0.0, b0, p.epsilon / 2f64.sqrt() * (1.0 - b0 * b0));
    let t = integrate(s0, [0.0, 80.0], &p, &IntegratorConfig::with_tolerances(1e-13, 1e-16), &[]).unwrap();
    let gap = |x: f64| 1.0 - t.state_at(x).b0();
    let rate = (gap(40.0) / gap(80.0)).ln() / 40.0;
    assert!((rate / (2f64.sqrt() * p.epsilon) - 1.0).abs() < 0.1, "rate {rate}");
}

proptest! {
    #[test]
    fn right_profile_stays_inside_its_envelope(
        x_ref in 0.0f64..30.0,
        dx in 0.0f64..200.0,
        eps in 0.02f64..0.25,
        g in 1.12f64..2.0,
    ) {
        let p = params(eps, g);
        let v_ref = v_right_profile(x_ref, &p);
        let x = x_ref + dx;
        let env = v_right_envelope(x, x_ref, v_ref, &p);
        let v = v_right_profile(x, &p);
        prop_assert!(env.lower <= v + 1e-15 && v <= env.upper + 1e-15, "{env:?} vs {v}");
    }
}
