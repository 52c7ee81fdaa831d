mod common;

use approx::assert_abs_diff_eq;
use common::{params, random_states};
use domainwall::dynamics::*;
use domainwall::error::Error;
use nalgebra::Complex;
use proptest::prelude::*;

/// Checks that every expected eigenvalue (all distinct) makes `J - lambda I` singular.
fn assert_same_spectrum(j: &nalgebra::Matrix6<f64>, want: Vec<Complex<f64>>, tol: f64) {
    assert_eq!(want.len(), 6);
    for lam in want {
        let shifted = nalgebra::DMatrix::from_fn(6, 6, |r, c| {
            Complex::new(j[(r, c)], 0.0) - if r == c { lam } else { Complex::new(0.0, 0.0) }
        });
        let smallest = shifted
            .try_svd(false, false, 1e-15, 10_000)
            .expect("SVD converges")
            .singular_values
            .min();
        assert!(smallest < tol, "eigenvalue {lam}: smallest singular value {smallest}");
    }
}

#[test]
fn equilibria_are_fixed_points_with_zero_integral() {
    for (eps, g) in [(0.1, 1.5), (0.05, 2.0), (0.2, 1.2)] {
        let p = params(eps, g);
        for m in [M_MINUS, M_PLUS] {
            assert_eq!(vector_field(&m, &p).norm_inf(), 0.0);
            assert_eq!(first_integral(&m, &p), 0.0);
        }
    }
}

#[test]
fn field_at_a_sample_point() {
    let p = params(0.1, 2.0);
    let s = State::new(0.0, 0.0, 0.0, 0.0, 1.0 / 2f64.sqrt(), 0.0);
    let f = vector_field(&s, &p);
    for i in 0..5 {
        assert_eq!(f[i], 0.0);
    }
    assert_abs_diff_eq!(f[5], -0.00353553, epsilon = 1e-8);
}

#[test]
fn integral_at_origin() {
    let p = params(0.1, 1.5);
    assert_abs_diff_eq!(first_integral(&State::default(), &p), 0.005, epsilon = 1e-15);
}

#[test]
fn spectra_at_equilibria() {
    for eps in [0.05, 0.1] {
        for g in [1.25, 1.5, 2.0] {
            let p = params(eps, g);
            let m = 2f64.powf(-0.25);
            let ed = eps * p.delta;
            let minus = vec![
                Complex::new(ed, 0.0),
                Complex::new(-ed, 0.0),
                Complex::new(m, m),
                Complex::new(m, -m),
                Complex::new(-m, m),
                Complex::new(-m, -m),
            ];
            assert_same_spectrum(&jacobian(&M_MINUS, &p), minus, 1e-10);
            let q = (p.delta / 2.0).sqrt();
            let es = eps * 2f64.sqrt();
            let plus = vec![
                Complex::new(es, 0.0),
                Complex::new(-es, 0.0),
                Complex::new(q, q),
                Complex::new(q, -q),
                Complex::new(-q, q),
                Complex::new(-q, -q),
            ];
            assert_same_spectrum(&jacobian(&M_PLUS, &p), plus, 1e-10);
        }
    }
}

#[test]
fn jacobian_matches_central_differences() {
    let p = params(0.1, 1.5);
    let h = 1e-6;
    for s in random_states(100, 1.2, 7) {
        let j = jacobian(&s, &p);
        for k in 0..6 {
            let mut up = s;
            let mut dn = s;
            up[k] += h;
            dn[k] -= h;
            let (fu, fd) = (vector_field(&up, &p), vector_field(&dn, &p));
            for i in 0..6 {
                let fd_ik = (fu[i] - fd[i]) / (2.0 * h);
                assert!((fd_ik - j[(i, k)]).abs() < 1e-7, "entry ({i},{k})");
            }
        }
    }
}

#[test]
fn integral_is_conserved_by_the_field() {
    for (eps, g) in [(0.1, 1.5), (0.25, 2.0), (0.02, 1.15)] {
        let p = params(eps, g);
        for s in random_states(100, 1.0, 11) {
            let grad = first_integral_gradient(&s, &p).to_vector();
            let f = vector_field(&s, &p).to_vector();
            assert!(grad.dot(&f).abs() < 1e-13);
        }
    }
}

#[test]
fn gradient_and_hessian_match_differences() {
    let p = params(0.2, 1.7);
    let h = 1e-5;
    for s in random_states(20, 1.0, 3) {
        let grad = first_integral_gradient(&s, &p);
        let hess = first_integral_hessian(&s, &p);
        for k in 0..6 {
            let mut up = s;
            let mut dn = s;
            up[k] += h;
            dn[k] -= h;
            let d = (first_integral(&up, &p) - first_integral(&dn, &p)) / (2.0 * h);
            assert!((d - grad[k]).abs() < 1e-8);
            let (gu, gd) = (first_integral_gradient(&up, &p), first_integral_gradient(&dn, &p));
            for i in 0..6 {
                assert!(((gu[i] - gd[i]) / (2.0 * h) - hess[(i, k)]).abs() < 1e-8);
            }
        }
    }
}

#[test]
fn symmetry_examples_and_parsing() {
    assert_eq!(symmetry_apply(&M_MINUS, Symmetry::NegA), State::new(-1.0, 0.0, 0.0, 0.0, 0.0, 0.0));
    assert_eq!("negAB".parse::<Symmetry>().unwrap(), Symmetry::NegAB);
    assert_eq!("R".parse::<Symmetry>().unwrap(), Symmetry::Reversibility);
    assert!(matches!("flip".parse::<Symmetry>(), Err(Error::UnknownSymmetry(_))));
}

#[test]
fn symmetries_commute_with_the_field() {
    let p = params(0.1, 1.5);
    for s in random_states(100, 1.5, 5) {
        let r = symmetry_apply(&s, Symmetry::Reversibility);
        assert_eq!(symmetry_apply(&r, Symmetry::Reversibility), s);
        let lhs = vector_field(&r, &p);
        let rhs = -1.0 * symmetry_apply(&vector_field(&s, &p), Symmetry::Reversibility);
        assert!((lhs - rhs).norm_inf() < 1e-14);
        for map in [Symmetry::NegA, Symmetry::NegB, Symmetry::NegAB] {
            let lhs = vector_field(&symmetry_apply(&s, map), &p);
            let rhs = symmetry_apply(&vector_field(&s, &p), map);
            assert!((lhs - rhs).norm_inf() < 1e-14);
            assert_eq!(first_integral(&symmetry_apply(&s, map), &p), first_integral(&s, &p));
        }
    }
}

#[test]
fn singular_limit_branches() {
    let p = params(0.1, 1.5);
    let grid: Vec<f64> = (-400..=400).map(|i| i as f64 * 0.25).collect();
    let prof = singular_limit(&p, &grid).unwrap();
    for [_, a, b] in &prof.left {
        assert!((a * a + p.g * b * b - 1.0).abs() < 1e-12);
    }
    let last = prof.left.last().unwrap();
    assert_eq!(last[0], 0.0);
    assert_abs_diff_eq!(last[1], 0.0, epsilon = 1e-7);
    assert_abs_diff_eq!(last[2], 1.0 / p.g.sqrt(), epsilon = 1e-14);
    assert!(prof.right.windows(2).all(|w| w[1][1] > w[0][1]));
    assert_abs_diff_eq!(singular_right_b(1e4, &p), 1.0, epsilon = 1e-12);
    assert_abs_diff_eq!(singular_left_b(-1e4, &p), 0.0, epsilon = 1e-12);
    let arc = singular_left_arc(&p, 11);
    assert_eq!(arc[0], [1.0, 0.0]);
    assert_abs_diff_eq!(arc[10][0], 0.0, epsilon = 1e-7);
}

#[test]
fn singular_branches_solve_their_equations() {
    let p = params(0.1, 1.5);
    let h = 1e-3;
    for x in [-30.0, -10.0, -1.0] {
        let bpp = (singular_left_b(x + h, &p) - 2.0 * singular_left_b(x, &p) + singular_left_b(x - h, &p)) / (h * h);
        let b = singular_left_b(x, &p);
        let rhs = p.epsilon.powi(2) * b * (p.delta.powi(2) - (p.g * p.g - 1.0) * b * b);
        assert!((bpp - rhs).abs() < 1e-8);
        let bp = (singular_left_b(x + h, &p) - singular_left_b(x - h, &p)) / (2.0 * h);
        assert!((bp - singular_left_b_prime(x, &p)).abs() < 1e-9);
    }
    for x in [0.0, 5.0, 30.0] {
        let b = singular_right_b(x, &p);
        assert!((singular_right_b_prime(x, &p) - p.epsilon / 2f64.sqrt() * (1.0 - b * b)).abs() < 1e-15);
    }
}

#[test]
fn singular_limit_needs_positive_epsilon() {
    let mut p = params(0.1, 1.5);
    p.epsilon = 0.0;
    assert!(matches!(singular_limit(&p, &[0.0]), Err(Error::SingularEpsilon)));
}

proptest! {
    #[test]
    fn integral_derivative_vanishes(s in prop::array::uniform6(-2.0f64..2.0), eps in 0.01f64..0.25, g in 1.12f64..2.0) {
        let p = params(eps, g);
        let s = State(s);
        let d = first_integral_gradient(&s, &p).to_vector().dot(&vector_field(&s, &p).to_vector());
        prop_assert!(d.abs() < 1e-12);
    }

    #[test]
    fn reversibility_is_an_involution(s in prop::array::uniform6(-10.0f64..10.0)) {
        let s = State(s);
        let r = symmetry_apply(&symmetry_apply(&s, Symmetry::Reversibility), Symmetry::Reversibility);
        prop_assert_eq!(r, s);
        let n = symmetry_apply(&symmetry_apply(&s, Symmetry::NegA), Symmetry::NegB);
        prop_assert_eq!(n, symmetry_apply(&s, Symmetry::NegAB));
    }
}
