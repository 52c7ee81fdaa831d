//! Outer regions: leading-order `B` profiles on both sides of the corner,
//! seeds on the sections `B0 = B00` and `B0 = B01` built from the tangent
//! planes of the invariant manifolds, and seeds along eigenvectors at the
//! equilibria.

use nalgebra::Vector6;
use serde::{Deserialize, Serialize};

use crate::dynamics::{first_integral, first_integral_gradient, State, M_MINUS, M_PLUS};
use crate::error::{Error, Result};
use crate::params::{Params, ScalingConfig};

/// Leading-order `B0` on the left of the section at `-x_star`:
/// `B0^2 = 1 / ((1 + delta^2/2) cosh^2(x0 - eps delta (x + x_star)))`
/// with `cosh x0 = 1 / (B00 sqrt(1 + delta^2/2))`.
pub fn b0_left_profile(x: f64, x_star: f64, b00: f64, p: &Params) -> Result<f64> {
    let c = 1.0 + 0.5 * p.delta * p.delta;
    let top = 1.0 / p.one_plus_delta2().sqrt();
    if !(b00 > 0.0 && b00 < top) {
        return Err(Error::Domain(format!(
            "B00 = {b00} must lie in (0, {top})"
        )));
    }
    let x0 = left_profile_shift(b00, p);
    let u = x0 - p.epsilon * p.delta * (x + x_star);
    Ok(1.0 / (c.sqrt() * u.cosh()))
}

/// The shift `x0 = acosh(1 / (B00 sqrt(1 + delta^2/2)))` of [`b0_left_profile`].
pub fn left_profile_shift(b00: f64, p: &Params) -> f64 {
    let c = 1.0 + 0.5 * p.delta * p.delta;
    (1.0 / (b00 * c.sqrt())).acosh()
}

/// Leading-order `v = B0 - 1` on the right, phased so that `B0(0) = 1/sqrt(g)`:
/// `V0(x) = (1 - sqrt g)(1 - t) / (sqrt g + t)` with `t = tanh(eps x / sqrt 2)`.
pub fn v_right_profile(x: f64, p: &Params) -> f64 {
    let sg = p.one_plus_delta2().sqrt();
    let t = (p.epsilon * x / 2f64.sqrt()).tanh();
    (1.0 - sg) * (1.0 - t) / (sg + t)
}

/// Bounds `lower <= v(x) <= upper` for `x >= x_ref` given `v(x_ref)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VEnvelope {
    pub lower: f64,
    pub upper: f64,
}

/// A priori envelope of `v` built from the rate factors 3/4 and 5/4.
pub fn v_right_envelope(x: f64, x_ref: f64, v_ref: f64, p: &Params) -> VEnvelope {
    let b_ref = 1.0 + v_ref;
    let at = |factor: f64| {
        let t = (factor * p.epsilon * (x - x_ref) / 2f64.sqrt()).tanh();
        v_ref * (1.0 - t) / (1.0 + b_ref * t)
    };
    VEnvelope {
        lower: at(0.75),
        upper: at(1.25),
    }
}

/// Seed on the left section built from tangent parameters of the unstable manifold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnstableSeed {
    pub tangent: [f64; 2],
    pub state: State,
}

/// Seed on the right section built from tangent parameters of the stable manifold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StableSeed {
    pub tangent: [f64; 2],
    pub state: State,
}

fn check_ball(t: [f64; 2], radius: f64) -> Result<()> {
    let norm = t[0].hypot(t[1]);
    if norm > radius * (1.0 + 1e-12) {
        return Err(Error::BallViolation { norm, radius });
    }
    Ok(())
}

/// Solves `W = 0` for `B1 >= 0` with every other component fixed.
pub fn b1_on_zero_level(s: &State, p: &Params) -> Result<f64> {
    let probe = State::new(s.a0(), s.a1(), s.a2(), s.a3(), s.b0(), 0.0);
    let rest = first_integral(&probe, p);
    if rest < 0.0 {
        return Err(Error::NegativeRadicand(rest));
    }
    Ok(rest.sqrt())
}

/// Unstable-side seed on `B0 = B00`.
pub fn unstable_seed(p: &Params, cfg: &ScalingConfig, tangent: [f64; 2]) -> Result<UnstableSeed> {
    check_ball(tangent, cfg.unstable_ball_radius(p))?;
    let b00 = cfg.b00.ok_or_else(|| {
        Error::Domain(format!(
            "alpha_minus delta = {} >= 1 leaves no left section at this epsilon",
            cfg.alpha_minus * p.delta
        ))
    })?;
    let [x1, x2] = tangent;
    let da = p.delta * cfg.alpha_minus;
    let mut s = State::new(
        da + da / 2f64.powf(0.75) * (x1 - x2),
        da.powf(1.5) * x1 - cfg.alpha_minus.powi(2) * p.delta * b00 / 2f64.sqrt(),
        da * da / 2f64.powf(0.25) * (x1 + x2),
        2f64.sqrt() * da.powf(2.5) * x2,
        b00,
        0.0,
    );
    s[5] = b1_on_zero_level(&s, p)?;
    Ok(UnstableSeed { tangent, state: s })
}

/// Stable-side seed on `B0 = B01`, with the slaved coordinates set to zero.
pub fn stable_seed(p: &Params, cfg: &ScalingConfig, tangent: [f64; 2]) -> Result<StableSeed> {
    check_ball(tangent, cfg.k1)?;
    let [x10, x20] = tangent;
    let da = p.delta * cfg.alpha_plus;
    let r = 2f64.sqrt();
    let mut s = State::new(
        da * x10,
        -da.powf(1.5) / r * (x10 + x20),
        da * da * x20,
        da.powf(2.5) / r * (x10 - x20),
        cfg.b01,
        0.0,
    );
    s[5] = b1_on_zero_level(&s, p)?;
    Ok(StableSeed { tangent, state: s })
}

/// Which equilibrium an eigen-seed starts from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Equilibrium {
    /// `M-`, seeded along its unstable eigenspace.
    Minus,
    /// `M+`, seeded along its stable eigenspace.
    Plus,
}

/// Real basis of the unstable eigenspace at `M-` or the stable one at `M+`.
///
/// The first vector is the `B` eigenvector; the other two are the real and
/// imaginary parts of the complex `A` eigenvector `(1, l, l^2, l^3)`.
pub fn eigen_basis(which: Equilibrium, p: &Params) -> [State; 3] {
    let (b_rate, a_re, a_im) = match which {
        Equilibrium::Minus => {
            let m = 2f64.powf(-0.25);
            (p.epsilon * p.delta, m, m)
        }
        Equilibrium::Plus => {
            let m = (p.delta / 2.0).sqrt();
            (-p.epsilon * 2f64.sqrt(), -m, m)
        }
    };
    let l = num_complex::Complex64::new(a_re, a_im);
    let (l2, l3) = (l * l, l * l * l);
    [
        State::new(0.0, 0.0, 0.0, 0.0, 1.0, b_rate),
        State::new(1.0, l.re, l2.re, l3.re, 0.0, 0.0),
        State::new(0.0, l.im, l2.im, l3.im, 0.0, 0.0),
    ]
}

/// Equilibrium plus `h` times a unit combination of eigenvectors, pulled back onto `W = 0`.
pub fn eigen_seed_at_equilibrium(
    which: Equilibrium,
    coefficients: [f64; 3],
    h: f64,
    p: &Params,
) -> State {
    let base = match which {
        Equilibrium::Minus => M_MINUS,
        Equilibrium::Plus => M_PLUS,
    };
    let basis = eigen_basis(which, p);
    let mut dir = Vector6::zeros();
    for (c, v) in coefficients.iter().zip(basis.iter()) {
        dir += *c * v.to_vector();
    }
    let norm = dir.norm();
    if h == 0.0 || norm == 0.0 {
        return base;
    }
    let mut s = State::from_vector(&(base.to_vector() + h / norm * dir));
    for _ in 0..20 {
        let w = first_integral(&s, p);
        let grad = first_integral_gradient(&s, p).to_vector();
        let g2 = grad.norm_squared();
        if w.abs() < 1e-16 || g2 == 0.0 {
            break;
        }
        s = State::from_vector(&(s.to_vector() - w / g2 * grad));
    }
    s
}
