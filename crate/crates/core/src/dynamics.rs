//! Vector field, Jacobian, first integral, equilibria, symmetries and the
//! singular-limit profile of the six-dimensional amplitude system
//!
//! ```text
//! A'''' = A (1 - A^2 - g B^2),    B'' = eps^2 B (-1 + g A^2 + B^2).
//! ```

use std::ops::{Add, Index, IndexMut, Mul, Sub};
use std::str::FromStr;

use nalgebra::{Matrix6, Vector6};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::Params;

/// A point `(A0, A1, A2, A3, B0, B1)` of phase space.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct State(pub [f64; 6]);

impl State {
    pub const fn new(a0: f64, a1: f64, a2: f64, a3: f64, b0: f64, b1: f64) -> Self {
        Self([a0, a1, a2, a3, b0, b1])
    }
    pub fn a0(&self) -> f64 {
        self.0[0]
    }
    pub fn a1(&self) -> f64 {
        self.0[1]
    }
    pub fn a2(&self) -> f64 {
        self.0[2]
    }
    pub fn a3(&self) -> f64 {
        self.0[3]
    }
    pub fn b0(&self) -> f64 {
        self.0[4]
    }
    pub fn b1(&self) -> f64 {
        self.0[5]
    }
    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
    pub fn from_slice(s: &[f64]) -> Self {
        let mut out = [0.0; 6];
        out.copy_from_slice(&s[..6]);
        Self(out)
    }
    pub fn to_vector(&self) -> Vector6<f64> {
        Vector6::from_column_slice(&self.0)
    }
    pub fn from_vector(v: &Vector6<f64>) -> Self {
        Self::from_slice(v.as_slice())
    }
    /// Maximum absolute entry.
    pub fn norm_inf(&self) -> f64 {
        self.0.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

impl Index<usize> for State {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl IndexMut<usize> for State {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.0[i]
    }
}

impl Add for State {
    type Output = State;
    fn add(self, o: State) -> State {
        State(std::array::from_fn(|i| self.0[i] + o.0[i]))
    }
}

impl Sub for State {
    type Output = State;
    fn sub(self, o: State) -> State {
        State(std::array::from_fn(|i| self.0[i] - o.0[i]))
    }
}

impl Mul<State> for f64 {
    type Output = State;
    fn mul(self, s: State) -> State {
        State(s.0.map(|v| self * v))
    }
}

/// The equilibrium with pure `A` rolls, `(1, 0, 0, 0, 0, 0)`.
pub const M_MINUS: State = State::new(1.0, 0.0, 0.0, 0.0, 0.0, 0.0);
/// The equilibrium with pure `B` rolls, `(0, 0, 0, 0, 1, 0)`.
pub const M_PLUS: State = State::new(0.0, 0.0, 0.0, 0.0, 1.0, 0.0);

/// Right-hand side of the first-order system.
pub fn vector_field(s: &State, p: &Params) -> State {
    let [a0, a1, a2, a3, b0, b1] = s.0;
    let e2 = p.epsilon * p.epsilon;
    State([
        a1,
        a2,
        a3,
        a0 * (1.0 - a0 * a0 - p.g * b0 * b0),
        b1,
        e2 * b0 * (-1.0 + p.g * a0 * a0 + b0 * b0),
    ])
}

/// Analytic Jacobian of [`vector_field`].
pub fn jacobian(s: &State, p: &Params) -> Matrix6<f64> {
    let [a0, _, _, _, b0, _] = s.0;
    let e2 = p.epsilon * p.epsilon;
    let g = p.g;
    let mut j = Matrix6::zeros();
    j[(0, 1)] = 1.0;
    j[(1, 2)] = 1.0;
    j[(2, 3)] = 1.0;
    j[(3, 0)] = 1.0 - 3.0 * a0 * a0 - g * b0 * b0;
    j[(3, 4)] = -2.0 * g * a0 * b0;
    j[(4, 5)] = 1.0;
    j[(5, 0)] = 2.0 * e2 * g * a0 * b0;
    j[(5, 4)] = e2 * (-1.0 + g * a0 * a0 + 3.0 * b0 * b0);
    j
}

/// The first integral `W`, which vanishes at both equilibria.
pub fn first_integral(s: &State, p: &Params) -> f64 {
    let [a0, a1, a2, a3, b0, b1] = s.0;
    let e2 = p.epsilon * p.epsilon;
    let d2 = p.delta * p.delta;
    let q = a0 * a0 + b0 * b0 - 1.0;
    2.0 * e2 * a1 * a3 - e2 * a2 * a2 - b1 * b1
        + 0.5 * e2 * q * q
        + e2 * d2 * a0 * a0 * b0 * b0
}

/// Gradient of [`first_integral`].
pub fn first_integral_gradient(s: &State, p: &Params) -> State {
    let [a0, a1, a2, a3, b0, b1] = s.0;
    let e2 = p.epsilon * p.epsilon;
    let d2 = p.delta * p.delta;
    let q = a0 * a0 + b0 * b0 - 1.0;
    State([
        e2 * (2.0 * q * a0 + 2.0 * d2 * a0 * b0 * b0),
        2.0 * e2 * a3,
        -2.0 * e2 * a2,
        2.0 * e2 * a1,
        e2 * (2.0 * q * b0 + 2.0 * d2 * a0 * a0 * b0),
        -2.0 * b1,
    ])
}

/// Hessian of [`first_integral`].
pub fn first_integral_hessian(s: &State, p: &Params) -> Matrix6<f64> {
    let [a0, _, _, _, b0, _] = s.0;
    let e2 = p.epsilon * p.epsilon;
    let d2 = p.delta * p.delta;
    let q = a0 * a0 + b0 * b0 - 1.0;
    let mut h = Matrix6::zeros();
    h[(0, 0)] = e2 * (2.0 * q + 4.0 * a0 * a0 + 2.0 * d2 * b0 * b0);
    h[(0, 4)] = e2 * (4.0 * a0 * b0 + 4.0 * d2 * a0 * b0);
    h[(4, 0)] = h[(0, 4)];
    h[(4, 4)] = e2 * (2.0 * q + 4.0 * b0 * b0 + 2.0 * d2 * a0 * a0);
    h[(1, 3)] = 2.0 * e2;
    h[(3, 1)] = 2.0 * e2;
    h[(2, 2)] = -2.0 * e2;
    h[(5, 5)] = -2.0;
    h
}

/// Discrete symmetries of the system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Symmetry {
    /// `A -> -A`.
    NegA,
    /// `B -> -B`.
    NegB,
    /// `(A, B) -> (-A, -B)`.
    NegAB,
    /// The reversibility involution `R`, combined with `x -> -x`.
    Reversibility,
}

impl FromStr for Symmetry {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "negA" => Ok(Symmetry::NegA),
            "negB" => Ok(Symmetry::NegB),
            "negAB" => Ok(Symmetry::NegAB),
            "reversibility" | "R" => Ok(Symmetry::Reversibility),
            other => Err(Error::UnknownSymmetry(other.to_string())),
        }
    }
}

/// Applies a symmetry to a state.
pub fn symmetry_apply(s: &State, map: Symmetry) -> State {
    let [a0, a1, a2, a3, b0, b1] = s.0;
    match map {
        Symmetry::NegA => State([-a0, -a1, -a2, -a3, b0, b1]),
        Symmetry::NegB => State([a0, a1, a2, a3, -b0, -b1]),
        Symmetry::NegAB => State([-a0, -a1, -a2, -a3, -b0, -b1]),
        Symmetry::Reversibility => State([a0, -a1, a2, -a3, b0, -b1]),
    }
}

/// The `epsilon -> 0` skeleton of the connection.
///
/// For `x <= 0` the orbit rides the ellipse `A^2 + g B^2 = 1`, where `B`
/// obeys `B'' = eps^2 B (delta^2 - (g^2 - 1) B^2)`; for `x >= 0` it has
/// `A = 0` and `B' = (eps / sqrt 2)(1 - B^2)`. Both branches meet at
/// `(A, B) = (0, 1/sqrt g)` at `x = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingularLimitProfile {
    /// `(x, A, B)` samples with `x <= 0`.
    pub left: Vec<[f64; 3]>,
    /// `(x, B)` samples with `x >= 0`.
    pub right: Vec<[f64; 2]>,
}

/// `B` on the left branch of the singular limit, phased so that `B(0) = 1/sqrt g`.
pub fn singular_left_b(x: f64, p: &Params) -> f64 {
    let g = p.g;
    let amp = (2.0 / (g + 1.0)).sqrt();
    let shift = (amp * g.sqrt()).acosh() / (p.epsilon * p.delta);
    amp / (p.epsilon * p.delta * (x - shift)).cosh()
}

/// `B'` on the left branch of the singular limit.
pub fn singular_left_b_prime(x: f64, p: &Params) -> f64 {
    let g = p.g;
    let amp = (2.0 / (g + 1.0)).sqrt();
    let k = p.epsilon * p.delta;
    let shift = (amp * g.sqrt()).acosh() / k;
    let u = k * (x - shift);
    -amp * k * u.tanh() / u.cosh()
}

/// `B` on the right branch of the singular limit.
pub fn singular_right_b(x: f64, p: &Params) -> f64 {
    (p.epsilon * x / 2f64.sqrt() + (1.0 / p.g.sqrt()).atanh()).tanh()
}

/// `B'` on the right branch of the singular limit.
pub fn singular_right_b_prime(x: f64, p: &Params) -> f64 {
    let b = singular_right_b(x, p);
    p.epsilon / 2f64.sqrt() * (1.0 - b * b)
}

/// `A` on the ellipse for a given `B`, clamped at zero past the corner.
pub fn ellipse_a(b: f64, p: &Params) -> f64 {
    (1.0 - p.g * b * b).max(0.0).sqrt()
}

/// Samples the singular-limit profile on the given abscissae.
pub fn singular_limit(p: &Params, grid: &[f64]) -> Result<SingularLimitProfile> {
    if !(p.epsilon > 0.0) {
        return Err(Error::SingularEpsilon);
    }
    let mut left = Vec::new();
    let mut right = Vec::new();
    for &x in grid {
        if x <= 0.0 {
            let b = singular_left_b(x, p);
            left.push([x, ellipse_a(b, p), b]);
        }
        if x >= 0.0 {
            right.push([x, singular_right_b(x, p)]);
        }
    }
    Ok(SingularLimitProfile { left, right })
}

/// The left branch as an arc parameterised by `B` in `[0, 1/sqrt g]`.
pub fn singular_left_arc(p: &Params, samples: usize) -> Vec<[f64; 2]> {
    let top = 1.0 / p.g.sqrt();
    let n = samples.max(2);
    (0..n)
        .map(|i| {
            let b = top * i as f64 / (n - 1) as f64;
            [ellipse_a(b, p), b]
        })
        .collect()
}
