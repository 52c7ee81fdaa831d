mod common;

use std::sync::OnceLock;

use approx::assert_abs_diff_eq;
use common::params;
use domainwall::connect::*;
use domainwall::dynamics::Symmetry;
use domainwall::error::Error;
use domainwall::integrate::IntegratorConfig;
use nalgebra::{Matrix4, Vector4};

fn baseline() -> &'static HeteroclinicSolve {
    static SOLVE: OnceLock<HeteroclinicSolve> = OnceLock::new();
    SOLVE.get_or_init(|| {
        let p = params(0.1, 1.5);
        heteroclinic_solve(&p, &HeteroclinicConfig::defaults(&p).unwrap()).unwrap()
    })
}

fn equating_context(rho: f64) -> MatchingContext {
    MatchingContext {
        a_minus: rho.powi(4) * 0.9,
        a_plus: 0.9,
    }
}

#[test]
fn closed_form_at_unit_ratio() {
    let u = matching_closed_form(1.0).unwrap().to_array();
    let want = [-0.3784142, 0.3182072, 0.5857864, -0.0506279];
    for (got, want) in u.iter().zip(want) {
        assert_abs_diff_eq!(*got, want, epsilon = 5e-8);
    }
    // Exact forms at rho = 1.
    let q = 2f64.powf(0.25) - 1.0;
    assert_abs_diff_eq!(u[0], -2.0 * q, epsilon = 1e-15);
    assert_abs_diff_eq!(u[1], 2f64.powf(0.75) * q, epsilon = 1e-15);
    assert_abs_diff_eq!(u[2], 2.0 - 2f64.sqrt(), epsilon = 1e-15);
    assert_abs_diff_eq!(u[3], -2f64.sqrt() * q * q, epsilon = 1e-15);
}

#[test]
fn closed_form_at_other_ratios() {
    assert_abs_diff_eq!(matching_closed_form(1.5).unwrap().x1u, -0.2576912, epsilon = 1e-7);
    let rho = 2f64.powf(-0.25);
    assert!(matches!(matching_closed_form(rho), Err(Error::SingularMatching { .. })));
}

#[test]
fn closed_form_solves_the_equated_families() {
    // The equated families are affine in the unknowns, so the map is
    // recovered exactly from its value at zero and at the unit vectors.
    for rho in [0.95, 1.0, 1.3, 1.5, 2.0] {
        let ctx = equating_context(rho);
        let how = Propagation::BoundaryEquating;
        let map = |u: [f64; 4]| Vector4::from(boundary_map(&MatchingUnknowns::from_array(u), &ctx, how).unwrap());
        let r0 = map([0.0; 4]);
        let mut m = Matrix4::zeros();
        for c in 0..4 {
            let mut e = [0.0; 4];
            e[c] = 1.0;
            m.set_column(c, &(map(e) - r0));
        }
        let solved = m.lu().solve(&(-r0)).unwrap();
        let closed = matching_closed_form(rho).unwrap().to_array();
        for k in 0..4 {
            assert_abs_diff_eq!(solved[k], closed[k], epsilon = 1e-12);
        }
        let at = boundary_map(&matching_closed_form(rho).unwrap(), &ctx, how).unwrap();
        assert!(at.iter().all(|r| r.abs() < 1e-14), "rho {rho}: {at:?}");
    }
}

#[test]
fn zero_unknowns_leave_the_constant_term() {
    let ctx = MatchingContext {
        a_minus: 2.0,
        a_plus: 1.0,
    };
    let zero = MatchingUnknowns::from_array([0.0; 4]);
    for how in [Propagation::BoundaryEquating, Propagation::Picard { grid_points: 512 }] {
        let r = boundary_map(&zero, &ctx, how).unwrap();
        assert_abs_diff_eq!(r[0], -1.0, epsilon = 1e-14);
        for v in &r[1..] {
            assert_abs_diff_eq!(*v, 0.0, epsilon = 1e-14);
        }
    }
}

#[test]
fn boundary_map_is_smooth() {
    let ctx = MatchingContext {
        a_minus: 1.6,
        a_plus: 1.0,
    };
    let u0 = matching_closed_form(ctx.rho()).unwrap().to_array();
    let how = Propagation::Integrate { rel_tol: 1e-13 };
    let central = |h: f64| {
        let mut up = u0;
        let mut dn = u0;
        up[2] += h;
        dn[2] -= h;
        let ru = boundary_map(&MatchingUnknowns::from_array(up), &ctx, how).unwrap();
        let rd = boundary_map(&MatchingUnknowns::from_array(dn), &ctx, how).unwrap();
        (ru[0] - rd[0]) / (2.0 * h)
    };
    let (d1, d2, d3) = (central(0.04), central(0.02), central(0.01));
    let ratio = (d1 - d2) / (d2 - d3);
    assert!((ratio - 4.0).abs() < 0.5, "Richardson ratio {ratio}");
}

#[test]
fn picard_and_integration_agree_on_the_corner() {
    let ctx = MatchingContext {
        a_minus: 1.6,
        a_plus: 1.0,
    };
    let stable = [0.03, -0.01];
    let by_picard = propagate_corner(stable, &ctx, Propagation::Picard { grid_points: 2048 }).unwrap();
    let by_rk = propagate_corner(stable, &ctx, Propagation::Integrate { rel_tol: 1e-13 }).unwrap();
    for j in 0..4 {
        assert_abs_diff_eq!(by_picard[j], by_rk[j], epsilon = 1e-9);
    }
}

#[test]
fn newton_and_shooting_agree_on_a_moderate_corner() {
    let ctx = MatchingContext {
        a_minus: 1.6,
        a_plus: 1.0,
    };
    let seed = matching_closed_form(ctx.rho()).unwrap();
    let how = Propagation::Integrate { rel_tol: 1e-13 };
    let newton = newton_matching(seed, &ctx, how, 1e-10, 25).unwrap();
    assert!(newton.residual < 1e-10);
    let shooting = domainwall::shooting::ShootingConfig {
        tol: 1e-11,
        ..Default::default()
    };
    let shot = solve_corner_matching(&ctx, seed, &shooting).unwrap();
    for (a, b) in newton.unknowns.to_array().iter().zip(shot.unknowns.to_array()) {
        assert_abs_diff_eq!(*a, b, epsilon = 1e-6);
    }
    let r = boundary_map(&shot.unknowns, &ctx, Propagation::Picard { grid_points: 4096 }).unwrap();
    assert!(r.iter().all(|v| v.abs() < 1e-8), "{r:?}");
}

#[test]
fn matched_corner_meets_both_families() {
    let corner = baseline().corner.as_ref().expect("corner matched");
    let ctx = corner.ctx;
    assert!(corner.residual < 1e-10);
    let u = corner.unknowns;
    let left = corner.eval(-ctx.a_minus);
    let right = corner.eval(ctx.a_plus);
    let fam_l = domainwall::inner::boundary_family(domainwall::inner::Side::Minus, u.unstable(), ctx.a_minus);
    let fam_r = domainwall::inner::boundary_family(domainwall::inner::Side::Plus, u.stable(), ctx.a_plus);
    for j in 0..4 {
        assert!((left[j] - fam_l[j]).abs() < 1e-8 * ctx.a_minus.powf((2 + j) as f64 / 4.0));
        assert!((right[j] - fam_r[j]).abs() < 1e-8);
    }
}

#[test]
fn connection_at_the_reference_point() {
    let s = baseline();
    let prof = &s.profile;
    let g = 1.5f64;
    assert!(prof.newton_iterations <= 25);
    assert!(prof.residual < 1e-10);
    assert!(prof.sup_w() < 1e-8, "sup W {}", prof.sup_w());
    assert!(prof.states.iter().all(|st| st.b1() > 0.0));
    assert!(prof.states.windows(2).all(|w| w[1].b0() > w[0].b0()));
    assert_abs_diff_eq!(prof.state_at(0.0).b0(), 1.0 / g.sqrt(), epsilon = 1e-10);
    assert_abs_diff_eq!(prof.state_at(0.0).b0(), 0.8164966, epsilon = 1e-7);
    assert!(prof.mu.abs() < 1e-10);
    // Ends sit next to the equilibria.
    let first = prof.states[0];
    let last = *prof.states.last().unwrap();
    assert!((first.a0() - 1.0).abs() < 1e-2 && first.b0() < 0.05);
    assert!(last.a0().abs() < 1e-2 && (last.b0() - 1.0).abs() < 1e-2);
    let a0 = prof.a_at_zero();
    assert!(a0 > 0.0 && a0 < 1.0);
    assert!(prof.corner_half_width().unwrap() > 0.0);
}

#[test]
fn connection_round_trips_through_csv() {
    let prof = &baseline().profile;
    let mut buf = Vec::new();
    prof.write_csv(&mut buf).unwrap();
    let back = HeteroclinicProfile::read_csv(prof.params, buf.as_slice()).unwrap();
    assert_eq!(back.xs, prof.xs);
    assert_eq!(back.states, prof.states);
    assert!((back.state_at(0.01).a0() - prof.state_at(0.01).a0()).abs() < 1e-8);
}

#[test]
fn mirrored_connection_solves_the_mirrored_problem() {
    let s = baseline();
    let sol = s.profile.solution.as_ref().unwrap();
    let cfg = IntegratorConfig {
        rel_tol: 1e-11,
        abs_tol: 1e-14,
        max_step: 0.5,
        ..IntegratorConfig::default()
    };
    let base = global_residual(&s.system, &sol.mesh, &sol.nodes, &cfg).unwrap();
    let mirrored = GlobalBvp {
        sign_a: -1.0,
        ..s.system
    };
    let nodes: Vec<Vec<f64>> = sol
        .nodes
        .iter()
        .map(|n| n.iter().enumerate().map(|(k, v)| if k < 4 { -v } else { *v }).collect())
        .collect();
    let image = global_residual(&mirrored, &sol.mesh, &nodes, &cfg).unwrap();
    assert_eq!(base.len(), image.len());
    for (a, b) in base.iter().zip(&image) {
        assert!((a.abs() - b.abs()).abs() < 1e-12);
    }
    let t = s.profile.transformed(Symmetry::NegA);
    assert_eq!(t.states[7].a0(), -s.profile.states[7].a0());
    assert_eq!(t.w, s.profile.w);
}

#[test]
fn perturbed_seeds_find_the_same_connection() {
    let p = params(0.1, 1.5);
    let base = &baseline().profile;
    for scale in [0.9, 1.1] {
        let cfg = HeteroclinicConfig {
            seed_scale: [scale, 2.0 - scale, scale, scale],
            ..HeteroclinicConfig::defaults(&p).unwrap()
        };
        let other = heteroclinic_solve(&p, &cfg).unwrap().profile;
        assert_eq!(other.xs, base.xs);
        let dist = other
            .states
            .iter()
            .zip(&base.states)
            .fold(0.0f64, |m, (a, b)| m.max((*a - *b).norm_inf()));
        assert!(dist < 1e-6, "scale {scale}: distance {dist}");
    }
}

#[test]
fn zero_epsilon_is_rejected() {
    let mut p = params(0.1, 1.5);
    let cfg = HeteroclinicConfig::defaults(&p).unwrap();
    p.epsilon = 0.0;
    let err = heteroclinic_solve(&p, &cfg).unwrap_err();
    assert!(matches!(err, Error::SingularEpsilon));
    assert!(err.to_string().contains("singular_limit"));
}

#[test]
fn generic_connection_is_transversal() {
    let rep = transversality(baseline()).unwrap();
    assert!(!rep.degenerate);
    assert!(rep.sigma_min > 1e-6);
    assert!(rep.condition.is_finite());
    let split = rep.splitting.unwrap();
    assert!(split > 1e-3, "splitting {split}");
    assert!(rep.tangency.unwrap() < split);
}

#[test]
fn rank_deficient_matrix_is_flagged() {
    let rows = vec![
        vec![1.0, 2.0, 3.0, 4.0],
        vec![2.0, 4.0, 6.0, 8.0],
        vec![0.0, 1.0, 0.0, 1.0],
        vec![1.0, 0.0, 1.0, 0.0],
    ];
    let rep = TransversalityReport::from_dense(&rows);
    assert!(rep.degenerate);
    let ok = TransversalityReport::from_dense(&[vec![2.0, 0.0], vec![0.0, 1.0]]);
    assert!(!ok.degenerate);
    assert_abs_diff_eq!(ok.condition, 2.0, epsilon = 1e-14);
}

#[test]
fn transversality_is_stable_under_refinement() {
    let p = params(0.1, 1.5);
    let base = transversality(baseline()).unwrap();
    let fine = HeteroclinicConfig {
        rel_tol: 1e-12,
        abs_tol: 1e-15,
        ..HeteroclinicConfig::defaults(&p).unwrap()
    };
    let rep = transversality(&heteroclinic_solve(&p, &fine).unwrap()).unwrap();
    assert!((rep.condition / base.condition - 1.0).abs() < 0.2, "{} vs {}", rep.condition, base.condition);
    // The splitting angle does not depend on the shooting mesh.
    let split = HeteroclinicConfig {
        segment: 1.5,
        ..HeteroclinicConfig::defaults(&p).unwrap()
    };
    let rep = transversality(&heteroclinic_solve(&p, &split).unwrap()).unwrap();
    let (a, b) = (rep.splitting.unwrap(), base.splitting.unwrap());
    assert!((a / b - 1.0).abs() < 0.2, "{a} vs {b}");
}
