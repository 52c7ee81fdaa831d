mod common;

use std::sync::OnceLock;

use approx::assert_abs_diff_eq;
use common::params;
use domainwall::connect::{heteroclinic_solve, HeteroclinicConfig, HeteroclinicProfile};
use domainwall::error::Error;
use domainwall::params::ScalingConfig;
use domainwall::verify::*;

fn baseline() -> &'static (HeteroclinicProfile, ScalingConfig) {
    static SOLVE: OnceLock<(HeteroclinicProfile, ScalingConfig)> = OnceLock::new();
    SOLVE.get_or_init(|| {
        let p = params(0.1, 1.5);
        let cfg = HeteroclinicConfig::defaults(&p).unwrap();
        let sol = heteroclinic_solve(&p, &cfg).unwrap();
        (sol.profile, cfg.scaling)
    })
}

fn grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

#[test]
fn plain_rate_of_a_pure_exponential() {
    let xs = grid(0.0, 20.0, 401);
    let ys: Vec<f64> = xs.iter().map(|x| (-0.3 * x).exp()).collect();
    let fit = fit_decay_rate(&xs, &ys, FitKind::Plain).unwrap();
    assert_abs_diff_eq!(fit.rate, 0.3, epsilon = 1e-3);
    assert!(fit.residual < 1e-12);
    assert_eq!(fit.points, 401);
    assert_abs_diff_eq!(fit.efolds(), 6.0, epsilon = 1e-9);
}

#[test]
fn envelope_rate_of_a_damped_oscillation() {
    let xs = grid(0.0, 40.0, 4001);
    let ys: Vec<f64> = xs.iter().map(|x| (-0.2 * x).exp() * x.cos()).collect();
    let fit = fit_decay_rate(&xs, &ys, FitKind::Envelope).unwrap();
    assert_abs_diff_eq!(fit.rate, 0.2, epsilon = 5e-3);
}

#[test]
fn constant_data_has_zero_rate() {
    let xs = grid(0.0, 5.0, 11);
    let fit = fit_decay_rate(&xs, &[0.7; 11], FitKind::Plain).unwrap();
    assert_abs_diff_eq!(fit.rate, 0.0, epsilon = 1e-14);
}

#[test]
fn too_few_samples_are_rejected() {
    assert!(matches!(
        fit_decay_rate(&[1.0], &[1.0], FitKind::Plain),
        Err(Error::InsufficientTail(_))
    ));
    assert!(matches!(
        fit_decay_rate(&[1.0, 2.0], &[1.0, 0.0], FitKind::Plain),
        Err(Error::InsufficientTail(_))
    ));
    assert!(matches!(fit_decay_rate(&[1.0, 2.0], &[1.0], FitKind::Plain), Err(Error::Domain(_))));
}

#[test]
fn scaling_span_requirements() {
    assert!(check_scaling_span(&[0.2, 0.1, 0.05, 0.025]).is_ok());
    assert!(matches!(check_scaling_span(&[0.1]), Err(Error::InsufficientSpan(_))));
    assert!(matches!(check_scaling_span(&[0.2, 0.15, 0.1, 0.05]), Err(Error::InsufficientSpan(_))));
}

#[test]
fn scaling_fit_recovers_power_laws() {
    let members: Vec<ScalingMember> = [0.2, 0.1, 0.05, 0.025]
        .iter()
        .map(|&e: &f64| ScalingMember {
            epsilon: e,
            a_at_zero: Some(1.3 * e.powf(0.4)),
            half_width: Some(0.7 * e.powf(-0.2)),
            error: None,
        })
        .chain(std::iter::once(ScalingMember {
            epsilon: 0.01,
            a_at_zero: None,
            half_width: None,
            error: Some("failed".into()),
        }))
        .collect();
    let fit = fit_scaling(1.5, members).unwrap();
    assert_abs_diff_eq!(fit.a0_slope, 0.4, epsilon = 1e-12);
    assert_abs_diff_eq!(fit.width_slope, -0.2, epsilon = 1e-12);
    assert!(fit.a0_residual < 1e-12 && fit.width_residual < 1e-12);
    assert_eq!(fit.members.len(), 5);
}

#[test]
fn scaling_fit_needs_two_members() {
    let one = vec![ScalingMember {
        epsilon: 0.1,
        a_at_zero: Some(0.5),
        half_width: Some(2.0),
        error: None,
    }];
    assert!(matches!(fit_scaling(1.5, one), Err(Error::InsufficientSpan(_))));
}

#[test]
fn expected_rates_at_the_baseline() {
    let p = params(0.1, 1.5);
    let e = expected_rates(&p);
    let d = 0.5f64.sqrt();
    assert_abs_diff_eq!(e.left_b, 0.1 * d, epsilon = 1e-15);
    assert_abs_diff_eq!(e.right_b, 0.1 * 2f64.sqrt(), epsilon = 1e-15);
    assert_abs_diff_eq!(e.right_a, (d / 2.0).sqrt(), epsilon = 1e-15);
}

#[test]
fn baseline_tail_rates_are_within_ten_percent() {
    let (profile, scaling) = baseline();
    let rates = fit_decay_rates(profile, scaling.x_star_plus).unwrap();
    let e = expected_rates(&profile.params);
    for (fit, want) in [(rates.left_b, e.left_b), (rates.right_b, e.right_b), (rates.right_a, e.right_a)] {
        assert!((fit.rate / want - 1.0).abs() <= 0.1, "{} vs {want}", fit.rate);
    }
    assert!(rates.left_a.rate >= 0.9 * e.left_a_min);
}

#[test]
fn baseline_passes_every_check() {
    let (profile, scaling) = baseline();
    let report = verify_profile(profile, scaling, 1e-8);
    for c in &report.checks {
        assert!(c.passed, "{} failed: measured {} bound {}", c.name, c.measured, c.bound);
    }
    assert!(report.passed());
    assert!(report.get("first_integral").is_some());
    assert!(report.get("missing").is_none());
}

#[test]
fn verification_is_deterministic() {
    let (profile, scaling) = baseline();
    assert_eq!(verify_profile(profile, scaling, 1e-8), verify_profile(profile, scaling, 1e-8));
}

#[test]
fn a_decreasing_segment_fails_monotonicity() {
    let (profile, scaling) = baseline();
    let mut bad = profile.clone();
    let k = bad.states.len() / 2;
    let prev = bad.states[k - 1].b0();
    bad.states[k].0[4] = prev - 1e-3;
    bad.states[k].0[5] = -1e-3;
    let report = verify_profile(&bad, scaling, 1e-8);
    assert!(!report.passed());
    assert!(!report.get("b0_increasing").unwrap().passed);
    assert!(!report.get("b1_positive").unwrap().passed);
    assert!(report.get("b0_in_unit_interval").unwrap().passed);
}

#[test]
fn short_tails_are_reported() {
    let (profile, scaling) = baseline();
    let keep: Vec<usize> = (0..profile.xs.len())
        .filter(|&i| profile.xs[i].abs() <= 3.0 * scaling.x_star_plus)
        .collect();
    let mut short = profile.clone();
    short.xs = keep.iter().map(|&i| profile.xs[i]).collect();
    short.states = keep.iter().map(|&i| profile.states[i]).collect();
    short.w = keep.iter().map(|&i| profile.w[i]).collect();
    assert!(matches!(
        fit_decay_rates(&short, scaling.x_star_plus),
        Err(Error::InsufficientTail(_))
    ));
    let report = verify_profile(&short, scaling, 1e-8);
    assert!(!report.get("tail_rates").unwrap().passed);
}
