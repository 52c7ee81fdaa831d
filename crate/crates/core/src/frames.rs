//! Linear frames attached to the two families of equilibria of the frozen
//! `A` equation, the coordinates they induce, the reduction of the neutral
//! coordinate through the first integral, and a numerical monodromy bound.
//!
//! Along the slow side (`A` near `sqrt(1 - g B0^2)`) the `A` block has two
//! complex pairs `+-lambda_r +- i lambda_i`. Along the fast side
//! (`A` near 0, `g B0^2 > 1`) the pairs are `delta_tilde (+-1 +- i) / sqrt 2`.

use nalgebra::{Matrix2, Matrix5, Vector5};
use serde::{Deserialize, Serialize};

use crate::dynamics::State;
use crate::error::{Error, Result};
use crate::integrate::{solve, IntegratorConfig};
use crate::params::Params;

/// `B0`-dependent eigen-data and basis of the slow side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlowFrame {
    pub b0: f64,
    /// `sqrt(1 - g B0^2)`.
    pub a_star: f64,
    pub lambda_r: f64,
    pub lambda_i: f64,
    /// Coupling `g` and `epsilon`, kept for the coordinate maps.
    pub g: f64,
    pub epsilon: f64,
    /// Basis vectors `Z0, Z1, V_r+, V_r-, V_i+, V_i-` as six-vectors.
    pub basis: [[f64; 6]; 6],
}

impl SlowFrame {
    /// Monodromy rate `(alpha delta)^(1/2) / 2^(1/4)` for a lower bound `A* >= alpha delta`.
    pub fn sigma(alpha: f64, delta: f64) -> f64 {
        (alpha * delta).sqrt() / 2f64.powf(0.25)
    }

    /// Residual of `lambda^4 - 2 eps^2 B0^2 g^2 lambda^2 + 2 A*^2` at `+-lambda_r +- i lambda_i`.
    pub fn quartic_residual(&self) -> f64 {
        let c = 2.0 * self.epsilon.powi(2) * self.b0.powi(2) * self.g.powi(2);
        let k = 2.0 * self.a_star.powi(2);
        let mut worst: f64 = 0.0;
        for sr in [1.0, -1.0] {
            for si in [1.0, -1.0] {
                let l = num_complex::Complex64::new(sr * self.lambda_r, si * self.lambda_i);
                let l2 = l * l;
                let r = l2 * l2 - c * l2 + k;
                worst = worst.max(r.norm());
            }
        }
        worst
    }

    /// Linear map from `(x1, x2, y1, y2, z1)` to `(A0 - A*, A1, A2, A3, B1)`.
    pub fn forward_matrix(&self) -> Matrix5<f64> {
        let (b, lr, li, s, g) = (self.b0, self.lambda_r, self.lambda_i, self.a_star, self.g);
        let e2 = self.epsilon * self.epsilon;
        let s2 = s * s;
        let c0r = -b * lr * (lr * lr - 3.0 * li * li) / (2.0 * s2);
        let c0i = -b * li * (3.0 * lr * lr - li * li) / (2.0 * s2);
        let d = lr * lr - li * li;
        // Columns: x1, x2, y1, y2, z1.
        let a0 = [c0r, c0i, -c0r, c0i, 0.0];
        let a1 = [b, 0.0, b, 0.0, -g * b * b];
        let a2 = [lr * b, li * b, -lr * b, li * b, 0.0];
        let a3 = [d * b, 2.0 * lr * li * b, d * b, -2.0 * lr * li * b, 0.0];
        let k = -e2 * g * b / s;
        let b1 = [
            k * a3[0],
            k * a3[1],
            k * a3[2],
            k * a3[3],
            s * b,
        ];
        Matrix5::from_row_slice(&[a0, a1, a2, a3, b1].concat())
    }
}

/// Builds the slow frame at `B0`.
pub fn slow_frame(b0: f64, p: &Params) -> Result<SlowFrame> {
    let g = p.one_plus_delta2();
    let a2 = 1.0 - g * b0 * b0;
    if !(b0 >= 0.0) || !(a2 > 0.0) {
        return Err(Error::Domain(format!(
            "slow frame needs 0 <= B0 < 1/sqrt(g); got B0 = {b0} with A*^2 = {a2}"
        )));
    }
    let a_star = a2.sqrt();
    let lhs = p.epsilon.powi(2) * b0 * b0 * g * g;
    if lhs > a_star {
        return Err(Error::DegenerateFrame { b0, lhs, a_star });
    }
    let lr = ((2f64.sqrt() * a_star + lhs) / 2.0).sqrt();
    let li = ((2f64.sqrt() * a_star - lhs) / 2.0).sqrt();
    let d = lr * lr - li * li;
    let gb = g * b0;
    let vr = |sg: f64| {
        [
            -sg * lr * (lr * lr - 3.0 * li * li) / (2.0 * a2),
            1.0,
            sg * lr,
            d,
            -sg * lr * d / (gb * a_star),
            -d * d / (gb * a_star),
        ]
    };
    let vi = |sg: f64| {
        [
            -(3.0 * lr * lr - li * li) / (2.0 * a2),
            0.0,
            1.0,
            sg * 2.0 * lr,
            -d / (gb * a_star),
            -sg * 2.0 * lr * d / (gb * a_star),
        ]
    };
    let z0 = [0.0, 0.0, 0.0, 0.0, a_star, 0.0];
    let z1 = [0.0, -gb, 0.0, 0.0, 0.0, a_star];
    Ok(SlowFrame {
        b0,
        a_star,
        lambda_r: lr,
        lambda_i: li,
        g,
        epsilon: p.epsilon,
        basis: [z0, z1, vr(1.0), vr(-1.0), vi(1.0), vi(-1.0)],
    })
}

/// Coordinates of a state relative to the slow frame at its own `B0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlowCoords {
    pub x1: f64,
    pub x2: f64,
    pub y1: f64,
    pub y2: f64,
    pub z1: f64,
    pub b0: f64,
}

impl SlowCoords {
    fn as_vector(&self) -> Vector5<f64> {
        Vector5::new(self.x1, self.x2, self.y1, self.y2, self.z1)
    }

    /// Scaled view `(X, Y) / (alpha^(3/2) delta)` and `z1 / (eps delta)`.
    pub fn scaled(&self, alpha: f64, p: &Params) -> [f64; 5] {
        let s = alpha.powf(1.5) * p.delta;
        [
            self.x1 / s,
            self.x2 / s,
            self.y1 / s,
            self.y2 / s,
            self.z1 / (p.epsilon * p.delta),
        ]
    }
}

/// Expresses a state in slow-frame coordinates; the frame must sit at the state's `B0`.
pub fn to_slow_coords(s: &State, frame: &SlowFrame) -> Result<SlowCoords> {
    check_base(s.b0(), frame.b0)?;
    let rhs = Vector5::new(s.a0() - frame.a_star, s.a1(), s.a2(), s.a3(), s.b1());
    let c = frame
        .forward_matrix()
        .lu()
        .solve(&rhs)
        .ok_or(Error::Singular(0))?;
    Ok(SlowCoords {
        x1: c[0],
        x2: c[1],
        y1: c[2],
        y2: c[3],
        z1: c[4],
        b0: frame.b0,
    })
}

/// Reconstructs the state from slow-frame coordinates.
pub fn from_slow_coords(c: &SlowCoords, frame: &SlowFrame) -> Result<State> {
    check_base(c.b0, frame.b0)?;
    let d = frame.forward_matrix() * c.as_vector();
    Ok(State::new(
        frame.a_star + d[0],
        d[1],
        d[2],
        d[3],
        frame.b0,
        d[4],
    ))
}

fn check_base(b0: f64, frame_b0: f64) -> Result<()> {
    if (b0 - frame_b0).abs() > 1e-14 * (1.0 + b0.abs()) {
        return Err(Error::Domain(format!(
            "state has B0 = {b0} but the frame is built at {frame_b0}"
        )));
    }
    Ok(())
}

/// `(1 + delta^2 B0^2 / (2 A*^2))^(1/2)`, the leading factor of the neutral coordinate.
pub fn z10_bar(frame: &SlowFrame, p: &Params) -> f64 {
    (1.0 + p.delta.powi(2) * frame.b0.powi(2) / (2.0 * frame.a_star.powi(2))).sqrt()
}

/// Resolves `z1 >= 0` from the zero level set of the first integral.
///
/// The terms linear in `z1` cancel, so `z1` solves
/// `A*^2 B0^2 z1^2 = 2 eps^2 A3 B0 (x1 + y1) - eps^2 A2^2 - (eps^2 g B0 A3 / A*)^2
///  + (eps^2/2)(A0^2 + B0^2 - 1)^2 + eps^2 delta^2 A0^2 B0^2`, and the
/// positive root is selected. The input `z1` is ignored.
pub fn z1_resolve(c: &SlowCoords, frame: &SlowFrame, p: &Params) -> Result<f64> {
    let probe = SlowCoords { z1: 0.0, ..*c };
    let s = from_slow_coords(&probe, frame)?;
    let e2 = p.epsilon * p.epsilon;
    let b0 = frame.b0;
    let (a0, a2, a3) = (s.a0(), s.a2(), s.a3());
    let q = a0 * a0 + b0 * b0 - 1.0;
    let rhs = 2.0 * e2 * a3 * b0 * (c.x1 + c.y1) - e2 * a2 * a2
        - (e2 * frame.g * b0 * a3 / frame.a_star).powi(2)
        + 0.5 * e2 * q * q
        + e2 * p.delta.powi(2) * a0 * a0 * b0 * b0;
    if rhs < 0.0 {
        return Err(Error::NegativeRadicand(rhs));
    }
    Ok(rhs.sqrt() / (frame.a_star * b0))
}

/// Fast-side frame at `B0 > 1/sqrt(g)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FastFrame {
    pub b0: f64,
    /// `(g B0^2 - 1)^(1/4)`.
    pub delta_tilde: f64,
    pub epsilon: f64,
    /// Basis vectors `V_r-, V_i-, V_r+, V_i+, W1-, W1+`.
    pub basis: [[f64; 6]; 6],
}

/// Builds the fast frame.
pub fn fast_frame(b0: f64, p: &Params) -> Result<FastFrame> {
    let q = p.one_plus_delta2() * b0 * b0 - 1.0;
    if !(q > 0.0) {
        return Err(Error::Domain(format!(
            "fast frame needs g B0^2 > 1; got B0 = {b0}"
        )));
    }
    let dt = q.powf(0.25);
    let r = 2f64.sqrt();
    let vr = |sg: f64| [1.0, sg * dt / r, 0.0, -sg * dt.powi(3) / r, 0.0, 0.0];
    let vi = |sg: f64| [0.0, sg * dt / r, dt * dt, sg * dt.powi(3) / r, 0.0, 0.0];
    let es = p.epsilon * r;
    Ok(FastFrame {
        b0,
        delta_tilde: dt,
        epsilon: p.epsilon,
        basis: [
            vr(-1.0),
            vi(-1.0),
            vr(1.0),
            vi(1.0),
            [0.0, 0.0, 0.0, 0.0, 1.0, -es],
            [0.0, 0.0, 0.0, 0.0, 1.0, es],
        ],
    })
}

/// Fast-side coordinates; `x` multiplies the decaying modes and `y` the growing ones.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FastCoords {
    pub x1: f64,
    pub x2: f64,
    pub y1: f64,
    pub y2: f64,
    /// `v = B0 - 1`.
    pub v: f64,
    pub b1: f64,
}

/// Reconstructs a state from fast-side coordinates.
pub fn from_fast_coords(c: &FastCoords, frame: &FastFrame) -> State {
    let d = frame.delta_tilde;
    let r = 2f64.sqrt();
    State::new(
        c.x1 + c.y1,
        -d / r * (c.x1 - c.y1 + c.x2 - c.y2),
        d * d * (c.x2 + c.y2),
        d.powi(3) / r * (c.x1 - c.y1 - c.x2 + c.y2),
        1.0 + c.v,
        c.b1,
    )
}

/// Expresses a state in fast-side coordinates.
pub fn to_fast_coords(s: &State, frame: &FastFrame) -> FastCoords {
    let d = frame.delta_tilde;
    let r = 2f64.sqrt();
    // p = x1 - y1 + x2 - y2, q = x1 - y1 - x2 + y2.
    let p = -r * s.a1() / d;
    let q = r * s.a3() / d.powi(3);
    let sum1 = s.a0();
    let sum2 = s.a2() / (d * d);
    let diff1 = 0.5 * (p + q);
    let diff2 = 0.5 * (p - q);
    FastCoords {
        x1: 0.5 * (sum1 + diff1),
        y1: 0.5 * (sum1 - diff1),
        x2: 0.5 * (sum2 + diff2),
        y2: 0.5 * (sum2 - diff2),
        v: s.b0() - 1.0,
        b1: s.b1(),
    }
}

/// Outcome of a monodromy bound check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonodromyReport {
    pub sigma: f64,
    /// `max ||S0(x, s)|| exp(-sigma (x - s))` over the sampled `x < s`.
    pub max_ratio: f64,
    pub samples: usize,
}

/// Spectral norm of a 2x2 matrix.
pub fn spectral_norm2(m: &Matrix2<f64>) -> f64 {
    let a = m.transpose() * m;
    let tr = a.trace();
    let det = a.determinant();
    let disc = (0.25 * tr * tr - det).max(0.0).sqrt();
    (0.5 * tr + disc).max(0.0).sqrt()
}

/// Transition matrix of `y' = L0(B0(x)) y` from `s` to `x`, with
/// `L0 = [[lambda_r, lambda_i], [-lambda_i, lambda_r]]`.
pub fn monodromy_matrix<F: Fn(f64) -> f64>(
    b0_path: &F,
    p: &Params,
    x: f64,
    s: f64,
) -> Result<Matrix2<f64>> {
    shifted_transition(b0_path, p, x, s, 0.0)
}

/// Transition matrix of `y' = (L0(B0(x)) - shift I) y`, which equals
/// `S0(x, s) exp(-shift (x - s))`.
fn shifted_transition<F: Fn(f64) -> f64>(
    b0_path: &F,
    p: &Params,
    x: f64,
    s: f64,
    shift: f64,
) -> Result<Matrix2<f64>> {
    if x == s {
        return Ok(Matrix2::identity());
    }
    let rhs_err = std::cell::Cell::new(None);
    let rhs = (4usize, |t: f64, y: &[f64], dy: &mut [f64]| {
        let (lr, li) = match slow_frame(b0_path(t), p) {
            Ok(f) => (f.lambda_r - shift, f.lambda_i),
            Err(e) => {
                rhs_err.set(Some(e));
                (0.0, 0.0)
            }
        };
        // Columns stored as (y00, y10, y01, y11).
        for c in 0..2 {
            let (u, v) = (y[2 * c], y[2 * c + 1]);
            dy[2 * c] = lr * u + li * v;
            dy[2 * c + 1] = -li * u + lr * v;
        }
    });
    let cfg = IntegratorConfig::with_tolerances(1e-12, 1e-14);
    let sol = solve(&rhs, s, &[1.0, 0.0, 0.0, 1.0], x, &cfg)?;
    if let Some(e) = rhs_err.take() {
        return Err(e);
    }
    let y = sol.last();
    Ok(Matrix2::new(y[0], y[2], y[1], y[3]))
}

/// Checks `||S0(x, s)|| <= exp(sigma (x - s))` for `x` sampled in `[x_lo, s]`.
pub fn monodromy_check<F: Fn(f64) -> f64>(
    b0_path: &F,
    p: &Params,
    alpha: f64,
    x_lo: f64,
    s: f64,
    samples: usize,
) -> Result<MonodromyReport> {
    if x_lo > s {
        return Err(Error::Domain("monodromy check needs x_lo <= s".into()));
    }
    let sigma = SlowFrame::sigma(alpha, p.delta);
    let n = samples.max(1);
    let mut max_ratio: f64 = 0.0;
    for k in 0..=n {
        let x = s - (s - x_lo) * k as f64 / n as f64;
        // The shifted system keeps the measured ratio of order one, so the
        // absolute tolerance does not pollute it on long intervals.
        let m = shifted_transition(b0_path, p, x, s, sigma)?;
        max_ratio = max_ratio.max(spectral_norm2(&m));
    }
    Ok(MonodromyReport {
        sigma,
        max_ratio,
        samples: n + 1,
    })
}
