mod common;

use approx::assert_abs_diff_eq;
use common::{params, random_values};
use domainwall::dynamics::State;
use domainwall::error::Error;
use domainwall::frames::*;
use domainwall::params::ScalingConfig;
use nalgebra::Matrix2;
use proptest::prelude::*;

fn coords(v: [f64; 5], b0: f64) -> SlowCoords {
    SlowCoords {
        x1: v[0],
        x2: v[1],
        y1: v[2],
        y2: v[3],
        z1: v[4],
        b0,
    }
}

#[test]
fn slow_frame_at_zero_base_point() {
    let f = slow_frame(0.0, &params(0.1, 1.5)).unwrap();
    assert_eq!(f.a_star, 1.0);
    assert_abs_diff_eq!(f.lambda_r, 0.8408964, epsilon = 1e-7);
    assert_abs_diff_eq!(f.lambda_i, 0.8408964, epsilon = 1e-7);
}

#[test]
fn slow_frame_sample_values() {
    let f = slow_frame(0.8, &params(0.01, 1.25)).unwrap();
    assert_abs_diff_eq!(f.a_star, 0.4472136, epsilon = 1e-7);
    assert_abs_diff_eq!(f.lambda_r, 0.5623858, epsilon = 1e-7);
    assert_abs_diff_eq!(f.lambda_i, 0.5622968, epsilon = 1e-7);
}

#[test]
fn slow_frame_domain_and_degeneracy() {
    assert!(matches!(slow_frame(1.0, &params(0.1, 1.25)), Err(Error::Domain(_))));
    // Large epsilon close to the corner loses the complex pairs.
    let p = params(0.25, 2.0);
    let top = 1.0 / 2f64.sqrt();
    assert!(matches!(slow_frame(top * 0.99999, &p), Err(Error::DegenerateFrame { .. })));
}

#[test]
fn eigen_data_over_a_sweep() {
    for (eps, g) in [(0.1, 1.5), (0.05, 2.0), (0.2, 1.2)] {
        let p = params(eps, g);
        let top = 1.0 / p.g.sqrt();
        for k in 0..100 {
            let b0 = 0.95 * top * k as f64 / 99.0;
            let f = slow_frame(b0, &p).unwrap();
            assert!(f.quartic_residual() < 1e-12);
            assert!(f.lambda_r > 0.0 && f.lambda_i > 0.0);
            assert!(f.lambda_r * f.lambda_i >= f.a_star / 2.0 - 1e-15);
            let root = f.a_star.sqrt();
            assert!(f.lambda_r <= 2f64.powf(0.25) * root + 1e-15);
            assert!(f.lambda_r >= 2f64.powf(-0.25) * root - 1e-15);
        }
    }
}

#[test]
fn zero_deviation_has_zero_coordinates() {
    let p = params(0.1, 1.5);
    let f = slow_frame(0.5, &p).unwrap();
    let s = State::new(f.a_star, 0.0, 0.0, 0.0, 0.5, 0.0);
    let c = to_slow_coords(&s, &f).unwrap();
    for v in [c.x1, c.x2, c.y1, c.y2, c.z1] {
        assert_abs_diff_eq!(v, 0.0, epsilon = 1e-15);
    }
}

#[test]
fn pure_basis_coordinate_is_recovered() {
    let p = params(0.1, 1.5);
    let f = slow_frame(0.4, &p).unwrap();
    for k in 0..5 {
        let mut v = [0.0; 5];
        v[k] = 1.0;
        let s = from_slow_coords(&coords(v, 0.4), &f).unwrap();
        let c = to_slow_coords(&s, &f).unwrap();
        let got = [c.x1, c.x2, c.y1, c.y2, c.z1];
        for j in 0..5 {
            assert_abs_diff_eq!(got[j], v[j], epsilon = 1e-12);
        }
    }
}

#[test]
fn slow_round_trips() {
    let p = params(0.1, 1.5);
    let vals = random_values(600, -1.0, 1.0, 17);
    for (i, chunk) in vals.chunks(6).enumerate() {
        let b0 = 0.2 + 0.5 * (chunk[5] + 1.0) / 2.0;
        let f = slow_frame(b0, &p).unwrap();
        let s = State::new(f.a_star + 0.1 * chunk[0], chunk[1], chunk[2], chunk[3], b0, chunk[4]);
        let back = from_slow_coords(&to_slow_coords(&s, &f).unwrap(), &f).unwrap();
        let err = (back - s).norm_inf() / s.norm_inf();
        assert!(err < 1e-12, "sample {i}: {err}");
    }
}

#[test]
fn mismatched_base_point_is_rejected() {
    let p = params(0.1, 1.5);
    let f = slow_frame(0.4, &p).unwrap();
    let s = State::new(0.5, 0.0, 0.0, 0.0, 0.41, 0.0);
    assert!(matches!(to_slow_coords(&s, &f), Err(Error::Domain(_))));
}

#[test]
fn neutral_coordinate_on_the_slow_manifold() {
    let p = params(0.1, 2.0);
    let f = slow_frame(0.5, &p).unwrap();
    assert_abs_diff_eq!(f.a_star * f.a_star, 0.5, epsilon = 1e-15);
    assert_abs_diff_eq!(z10_bar(&f, &p), 1.1180340, epsilon = 1e-7);
    let z1 = z1_resolve(&coords([0.0; 5], 0.5), &f, &p).unwrap();
    assert_abs_diff_eq!(z1, p.epsilon * p.delta * z10_bar(&f, &p), epsilon = 1e-15);
    let f0 = slow_frame(1e-8, &p).unwrap();
    assert_abs_diff_eq!(z10_bar(&f0, &p), 1.0, epsilon = 1e-15);
}

#[test]
fn resolved_state_lies_on_zero_level_with_growing_b() {
    let p = params(0.1, 1.5);
    let top = 0.9 / p.g.sqrt();
    let vals = random_values(200, -1e-3, 1e-3, 23);
    for (k, ch) in vals.chunks(4).enumerate() {
        let b0 = top * (k as f64 + 0.5) / 50.0;
        let f = slow_frame(b0, &p).unwrap();
        let mut c = coords([ch[0], ch[1], ch[2], ch[3], 0.0], b0);
        c.z1 = z1_resolve(&c, &f, &p).unwrap();
        let s = from_slow_coords(&c, &f).unwrap();
        assert!(s.b1() > 0.0);
        let w = domainwall::dynamics::first_integral(&s, &p);
        assert!(w.abs() < 1e-15, "W = {w}");
    }
}

#[test]
fn negative_radicand_is_reported() {
    let p = params(0.1, 1.5);
    let f = slow_frame(0.3, &p).unwrap();
    // A large A'' component dominates the positive terms of the radicand.
    let c = coords([0.0, 5.0, 0.0, 5.0, 0.0], 0.3);
    assert!(matches!(z1_resolve(&c, &f, &p), Err(Error::NegativeRadicand(_))));
}

#[test]
fn fast_frame_examples() {
    let p = params(0.1, 2.0);
    assert_abs_diff_eq!(fast_frame(1.0, &p).unwrap().delta_tilde, 1.0, epsilon = 1e-15);
    let cfg = ScalingConfig::defaults(&p).unwrap();
    let ad = cfg.alpha_plus * p.delta;
    let b01 = ((1.0 + ad * ad) / p.g).sqrt();
    assert_abs_diff_eq!(cfg.b01, b01, epsilon = 1e-15);
    assert_abs_diff_eq!(fast_frame(b01, &p).unwrap().delta_tilde, ad.sqrt(), epsilon = 1e-12);
    let f = fast_frame(0.9, &p).unwrap();
    let d = f.delta_tilde;
    let c = FastCoords {
        x1: 1.0,
        x2: 0.0,
        y1: 0.0,
        y2: 0.0,
        v: 0.0,
        b1: 0.0,
    };
    let s = from_fast_coords(&c, &f);
    let r = 2f64.sqrt();
    assert_abs_diff_eq!(s.a0(), 1.0, epsilon = 1e-15);
    assert_abs_diff_eq!(s.a1(), -d / r, epsilon = 1e-15);
    assert_abs_diff_eq!(s.a2(), 0.0, epsilon = 1e-15);
    assert_abs_diff_eq!(s.a3(), d.powi(3) / r, epsilon = 1e-15);
    assert!(matches!(fast_frame(1.0 / p.g.sqrt(), &p), Err(Error::Domain(_))));
}

#[test]
fn fast_basis_vectors_are_eigenvectors_of_the_frozen_block() {
    let p = params(0.1, 1.5);
    let f = fast_frame(0.95, &p).unwrap();
    let d = f.delta_tilde;
    // Frozen A block at A = 0: A'''' = (1 - g B0^2) A = -d^4 A.
    for (k, sr) in [(0usize, -1.0), (2, 1.0)] {
        let re = f.basis[k];
        let im = f.basis[k + 1];
        let lam = nalgebra::Complex::new(sr * d / 2f64.sqrt(), -sr * d / 2f64.sqrt());
        let v: Vec<_> = (0..4).map(|i| nalgebra::Complex::new(re[i], im[i])).collect();
        for i in 0..3 {
            assert!((v[i + 1] - lam * v[i]).norm() < 1e-12 || (v[i + 1] - lam.conj() * v[i]).norm() < 1e-12);
        }
    }
}

#[test]
fn monodromy_of_the_frozen_origin() {
    let p = params(0.1, 1.5);
    let lr = 2f64.powf(-0.25);
    for x in [-0.5, -3.0, -10.0] {
        let m = monodromy_matrix(&|_| 0.0, &p, x, 0.0).unwrap();
        assert_abs_diff_eq!(spectral_norm2(&m), (lr * x).exp(), epsilon = 1e-10 * (lr * x).exp().max(1e-300));
    }
    let rep = monodromy_check(&|_| 0.0, &p, 1.0 / p.delta, -20.0, 0.0, 40).unwrap();
    assert!(rep.max_ratio <= 1.0 + 1e-8);
}

#[test]
fn monodromy_matches_the_rotation_form() {
    let p = params(0.1, 1.5);
    let f = slow_frame(0.3, &p).unwrap();
    let (lr, li) = (f.lambda_r, f.lambda_i);
    for t in [-0.7, -4.0, -12.0] {
        let m = monodromy_matrix(&|_| 0.3, &p, t, 0.0).unwrap();
        let e = (lr * t).exp();
        let want = Matrix2::new((li * t).cos(), (li * t).sin(), -(li * t).sin(), (li * t).cos()) * e;
        assert!((m - want).abs().max() < 1e-10 * e.max(1.0));
    }
}

#[test]
fn degenerate_interval_is_identity() {
    let p = params(0.1, 1.5);
    assert_eq!(monodromy_matrix(&|_| 0.4, &p, 2.0, 2.0).unwrap(), Matrix2::identity());
}

#[test]
fn monodromy_bound_on_varying_paths() {
    let p = params(0.1, 1.5);
    let g = p.g;
    for (b_mid, slope) in [(0.3, 0.05), (0.5, 0.02), (0.6, 0.1)] {
        let path = move |x: f64| b_mid + 0.1 * (slope * x).tanh();
        // Smallest A* along the path bounds alpha delta from above.
        let b_max = b_mid + 0.1;
        let a_min = (1.0 - g * b_max * b_max).sqrt();
        let alpha = a_min / p.delta;
        let rep = monodromy_check(&path, &p, alpha, -60.0, 0.0, 60).unwrap();
        assert!(rep.max_ratio <= 1.0 + 1e-8, "ratio {}", rep.max_ratio);
    }
}

proptest! {
    #[test]
    fn fast_round_trip(v in prop::array::uniform6(-1.0f64..1.0), b0 in 0.9f64..1.1) {
        let p = params(0.1, 1.5);
        let f = fast_frame(b0, &p).unwrap();
        let s = State(v);
        let back = from_fast_coords(&to_fast_coords(&s, &f), &f);
        prop_assert!((back - s).norm_inf() < 1e-12);
    }

    #[test]
    fn slow_round_trip_from_coordinates(v in prop::array::uniform5(-1.0f64..1.0), b0 in 0.2f64..0.75) {
        let p = params(0.1, 1.5);
        let f = slow_frame(b0, &p).unwrap();
        let c = coords(v, b0);
        let back = to_slow_coords(&from_slow_coords(&c, &f).unwrap(), &f).unwrap();
        let got = [back.x1, back.x2, back.y1, back.y2, back.z1];
        for j in 0..5 {
            prop_assert!((got[j] - v[j]).abs() < 1e-12);
        }
    }
}
