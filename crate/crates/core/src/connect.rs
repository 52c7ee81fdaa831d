//! Global assembly of the connection from `M-` to `M+`.
//!
//! The corner layer is matched first: the four tangent parameters and the
//! corner solution on `[-a_minus, a_plus]` are found by multiple shooting
//! seeded with the closed-form solution of the equated boundary families.
//! The matched corner, the outer `B` profiles and a WKB continuation of the
//! decaying `A` modes then seed a multiple-shooting solve of the full
//! six-dimensional system on `[-L_minus, L_plus]`, with projection
//! conditions onto the eigenspaces at both ends, the phase condition
//! `B0(0) = 1/sqrt(g)` and an unfolding parameter `mu` in front of the
//! gradient of the first integral (it vanishes at the solution).

use std::io::Write;
use std::sync::Arc;

use nalgebra::{DMatrix, Matrix4, Vector4};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::band::BandMatrix;
use crate::dynamics::{
    first_integral, first_integral_gradient, first_integral_hessian, jacobian, singular_left_b,
    singular_left_b_prime, singular_right_b, singular_right_b_prime, symmetry_apply, vector_field,
    State, Symmetry,
};
use crate::error::{Error, Result};
use crate::inner::{
    boundary_family, boundary_family_jacobian, picard_extend, picard_solve, InnerProblem,
    InnerScale, Side,
};
use crate::integrate::{bisect, read_profile_csv, solve, write_profile_csv, IntegratorConfig};
use crate::params::{corner_scale_constant, Params, ScalingConfig};
use crate::shooting::{mesh_with_breaks, shoot, BvpSystem, ShootingConfig, ShootingSolution};

/// The four tangent parameters matched across the corner.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchingUnknowns {
    pub x1u: f64,
    pub x2u: f64,
    pub x10s: f64,
    pub x20s: f64,
}

impl MatchingUnknowns {
    pub fn to_array(&self) -> [f64; 4] {
        [self.x1u, self.x2u, self.x10s, self.x20s]
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Self {
            x1u: a[0],
            x2u: a[1],
            x10s: a[2],
            x20s: a[3],
        }
    }

    pub fn unstable(&self) -> [f64; 2] {
        [self.x1u, self.x2u]
    }

    pub fn stable(&self) -> [f64; 2] {
        [self.x10s, self.x20s]
    }
}

/// Solution of the equated boundary families, with `rho = (a_minus/a_plus)^(1/4)`.
pub fn matching_closed_form(rho: f64) -> Result<MatchingUnknowns> {
    let den = 2.0 * rho.powi(4) - 1.0;
    if den.abs() <= 1e-9 || !rho.is_finite() {
        return Err(Error::SingularMatching { rho });
    }
    let q = 2f64.powf(0.25) * rho - 1.0;
    let r2 = 2f64.sqrt();
    Ok(MatchingUnknowns {
        x1u: -2.0 * rho * q / den,
        x2u: 2f64.powf(0.75) * q / den,
        x10s: r2 * rho.powi(4) * (r2 * rho * rho - 1.0) / den,
        x20s: -rho.powi(4) * r2 * q * q / den,
    })
}

/// How the corner data are carried from `z = a_plus` to `z = -a_minus`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Propagation {
    /// The data at `-a_minus` are taken equal to the data at `a_plus`.
    BoundaryEquating,
    /// Picard iteration on `[-a_plus, a_plus]` followed by the leftward cascade.
    Picard { grid_points: usize },
    /// Adaptive integration of the corner equation.
    Integrate { rel_tol: f64 },
}

/// Half-widths of the corner interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchingContext {
    pub a_minus: f64,
    pub a_plus: f64,
}

impl MatchingContext {
    pub fn from_scaling(cfg: &ScalingConfig) -> Self {
        Self {
            a_minus: cfg.a_minus,
            a_plus: cfg.a_plus,
        }
    }

    pub fn rho(&self) -> f64 {
        (self.a_minus / self.a_plus).powf(0.25)
    }

    fn scales(&self) -> [f64; 4] {
        std::array::from_fn(|j| self.a_minus.powf((2 + j) as f64 / 4.0))
    }
}

/// Corner data at `-a_minus` obtained from stable-side data at `a_plus`.
pub fn propagate_corner(
    stable: [f64; 2],
    ctx: &MatchingContext,
    how: Propagation,
) -> Result<[f64; 4]> {
    let data = boundary_family(Side::Plus, stable, ctx.a_plus);
    match how {
        Propagation::BoundaryEquating => Ok(data),
        Propagation::Picard { grid_points } => {
            let mut prob = InnerProblem::new(ctx.a_minus, ctx.a_plus, data);
            prob.grid_points = grid_points;
            let sol = picard_solve(&prob)?;
            let sol = picard_extend(&sol, ctx.a_minus, &prob)?;
            Ok(sol.values[0])
        }
        Propagation::Integrate { rel_tol } => {
            let rhs = (4usize, |z: f64, y: &[f64], dy: &mut [f64]| {
                dy[0] = y[1];
                dy[1] = y[2];
                dy[2] = y[3];
                dy[3] = -y[0] * (y[0] * y[0] + z);
            });
            let cfg = IntegratorConfig::with_tolerances(rel_tol, rel_tol * 1e-2);
            let sol = solve(&rhs, ctx.a_plus, &data, -ctx.a_minus, &cfg)?;
            let e = sol.last();
            Ok([e[0], e[1], e[2], e[3]])
        }
    }
}

/// Matching residual: corner data at `-a_minus` minus the unstable-side family,
/// divided componentwise by `(a_minus^(1/2), a_minus^(3/4), a_minus, a_minus^(5/4))`.
pub fn boundary_map(u: &MatchingUnknowns, ctx: &MatchingContext, how: Propagation) -> Result<[f64; 4]> {
    let inner = propagate_corner(u.stable(), ctx, how)?;
    let fam = boundary_family(Side::Minus, u.unstable(), ctx.a_minus);
    let sc = ctx.scales();
    Ok(std::array::from_fn(|j| (inner[j] - fam[j]) / sc[j]))
}

/// Outcome of a Newton solve on [`boundary_map`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchingSolve {
    pub unknowns: MatchingUnknowns,
    pub iterations: usize,
    pub residual: f64,
    /// Row-major finite-difference Jacobian at the solution.
    pub jacobian: [[f64; 4]; 4],
}

/// Newton iteration on [`boundary_map`] with forward-difference Jacobian and halving line search.
pub fn newton_matching(
    seed: MatchingUnknowns,
    ctx: &MatchingContext,
    how: Propagation,
    tol: f64,
    max_iter: usize,
) -> Result<MatchingSolve> {
    let eval = |u: &Vector4<f64>| -> Result<Vector4<f64>> {
        let r = boundary_map(&MatchingUnknowns::from_array([u[0], u[1], u[2], u[3]]), ctx, how)?;
        Ok(Vector4::from(r))
    };
    let mut u = Vector4::from(seed.to_array());
    let mut r = eval(&u)?;
    let mut iterations = 0;
    loop {
        let mut jac = Matrix4::zeros();
        for c in 0..4 {
            let mut up = u;
            let h = 1e-7 * (1.0 + u[c].abs());
            up[c] += h;
            let rp = eval(&up)?;
            jac.set_column(c, &((rp - r) / h));
        }
        let res = r.amax();
        if res < tol {
            return Ok(MatchingSolve {
                unknowns: MatchingUnknowns::from_array([u[0], u[1], u[2], u[3]]),
                iterations,
                residual: res,
                jacobian: std::array::from_fn(|i| std::array::from_fn(|j| jac[(i, j)])),
            });
        }
        if iterations >= max_iter {
            let sv = jac.singular_values();
            return Err(Error::NewtonDivergence {
                iterations,
                residual: res,
                condition: sv.max() / sv.min(),
            });
        }
        let step = jac.lu().solve(&(-r)).ok_or(Error::Singular(0))?;
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..=30 {
            let trial = u + lambda * step;
            if let Ok(rt) = eval(&trial) {
                if rt.amax() < (1.0 - 0.1 * lambda) * res || rt.amax() < tol {
                    u = trial;
                    r = rt;
                    accepted = true;
                    break;
                }
            }
            lambda *= 0.5;
        }
        iterations += 1;
        if !accepted {
            let sv = jac.singular_values();
            return Err(Error::NewtonDivergence {
                iterations,
                residual: res,
                condition: sv.max() / sv.min(),
            });
        }
    }
}

/// The corner problem with its four tangent parameters carried as constant components.
struct CornerBvp {
    ctx: MatchingContext,
}

impl BvpSystem for CornerBvp {
    fn dim(&self) -> usize {
        8
    }
    fn output_dim(&self) -> usize {
        4
    }
    fn rhs(&self, z: f64, y: &[f64], dy: &mut [f64]) {
        dy[0] = y[1];
        dy[1] = y[2];
        dy[2] = y[3];
        dy[3] = -y[0] * (y[0] * y[0] + z);
        dy[4..8].fill(0.0);
    }
    fn jacobian(&self, z: f64, y: &[f64], jac: &mut [f64]) {
        jac.fill(0.0);
        jac[1] = 1.0;
        jac[8 + 2] = 1.0;
        jac[16 + 3] = 1.0;
        jac[24] = -(3.0 * y[0] * y[0] + z);
    }
    fn left_count(&self) -> usize {
        4
    }
    fn left_bc(&self, y: &[f64], r: &mut [f64], jac: &mut [f64]) {
        let a = self.ctx.a_minus;
        let fam = boundary_family(Side::Minus, [y[4], y[5]], a);
        let fj = boundary_family_jacobian(Side::Minus, a);
        let sc = self.ctx.scales();
        for j in 0..4 {
            r[j] = (y[j] - fam[j]) / sc[j];
            jac[j * 8 + j] = 1.0 / sc[j];
            jac[j * 8 + 4] = -fj[j][0] / sc[j];
            jac[j * 8 + 5] = -fj[j][1] / sc[j];
        }
    }
    fn right_count(&self) -> usize {
        4
    }
    fn right_bc(&self, y: &[f64], r: &mut [f64], jac: &mut [f64]) {
        let a = self.ctx.a_plus;
        let fam = boundary_family(Side::Plus, [y[6], y[7]], a);
        let fj = boundary_family_jacobian(Side::Plus, a);
        for j in 0..4 {
            r[j] = y[j] - fam[j];
            jac[j * 8 + j] = 1.0;
            jac[j * 8 + 6] = -fj[j][0];
            jac[j * 8 + 7] = -fj[j][1];
        }
    }
}

/// Smooth approximation of the corner solution, `sqrt((-z + sqrt(z^2 + 1)) / 2)`, with derivatives.
pub fn corner_guess(z: f64) -> [f64; 4] {
    let r = (z * z + 1.0).sqrt();
    let a = ((r - z) / 2.0).sqrt();
    let f1 = -1.0 / (2.0 * r);
    let f2 = z / (2.0 * r.powi(3));
    let f3 = (r * r - 3.0 * z * z) / (2.0 * r.powi(5));
    [
        a,
        a * f1,
        a * (f2 + f1 * f1),
        a * (f3 + 3.0 * f1 * f2 + f1.powi(3)),
    ]
}

/// Matched corner layer.
#[derive(Debug, Clone)]
pub struct CornerMatch {
    pub ctx: MatchingContext,
    pub seed: MatchingUnknowns,
    pub unknowns: MatchingUnknowns,
    pub iterations: usize,
    pub residual: f64,
    pub solution: ShootingSolution,
}

impl CornerMatch {
    /// `(A, A', A'', A''')` of the matched corner solution.
    pub fn eval(&self, z: f64) -> [f64; 4] {
        let mut out = [0.0; 4];
        let z = z.clamp(-self.ctx.a_minus, self.ctx.a_plus);
        self.solution.eval_into(z, &mut out);
        out
    }
}

/// Solves the corner matching by multiple shooting, starting from `seed`.
pub fn solve_corner_matching(
    ctx: &MatchingContext,
    seed: MatchingUnknowns,
    cfg: &ShootingConfig,
) -> Result<CornerMatch> {
    let mesh = mesh_with_breaks(-ctx.a_minus, ctx.a_plus, &[0.0], 1.0);
    let guess = mesh
        .iter()
        .map(|&z| {
            let mut v = corner_guess(z).to_vec();
            v.extend_from_slice(&seed.to_array());
            v
        })
        .collect();
    let sys = CornerBvp { ctx: *ctx };
    let sol = shoot(&sys, &mesh, guess, cfg)?;
    let last = &sol.nodes[0];
    Ok(CornerMatch {
        ctx: *ctx,
        seed,
        unknowns: MatchingUnknowns::from_array([last[4], last[5], last[6], last[7]]),
        iterations: sol.iterations,
        residual: sol.residual,
        solution: sol,
    })
}

/// Settings of [`heteroclinic_solve`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeteroclinicConfig {
    pub scaling: ScalingConfig,
    /// Newton tolerance on the sup norm of the shooting residual.
    pub tol: f64,
    pub max_iter: usize,
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Left truncation `L_minus = left_factor / (eps delta)`.
    pub left_factor: f64,
    /// Right truncation `L_plus = right_factor / (eps sqrt 2)`.
    pub right_factor: f64,
    /// Maximal shooting segment length.
    pub segment: f64,
    /// Spacing of the exported samples.
    pub sample_spacing: f64,
    /// Multiplicative perturbation of the closed-form seed, for uniqueness studies.
    pub seed_scale: [f64; 4],
}

impl HeteroclinicConfig {
    pub fn new(scaling: ScalingConfig) -> Self {
        Self {
            scaling,
            tol: 1e-10,
            max_iter: 25,
            rel_tol: 1e-11,
            abs_tol: 1e-14,
            left_factor: 8.0,
            right_factor: 8.0,
            segment: 3.0,
            sample_spacing: 0.05,
            seed_scale: [1.0; 4],
        }
    }

    pub fn defaults(p: &Params) -> Result<Self> {
        Ok(Self::new(ScalingConfig::defaults(p)?))
    }

    fn shooting(&self) -> ShootingConfig {
        ShootingConfig {
            integrator: IntegratorConfig {
                rel_tol: self.rel_tol,
                abs_tol: self.abs_tol,
                max_step: 0.5,
                ..IntegratorConfig::default()
            },
            tol: self.tol,
            max_iter: self.max_iter,
            max_halvings: 30,
        }
    }
}

/// The six-dimensional connection problem with the unfolding parameter as a seventh component.
#[derive(Debug, Clone, Copy)]
pub struct GlobalBvp {
    pub params: Params,
    /// Index of the node at `x = 0`.
    pub phase_node: usize,
    /// Sign of `A` at the left equilibrium (`-1` for the `A -> -A` image).
    pub sign_a: f64,
    /// Sign of `B` at the right equilibrium.
    pub sign_b: f64,
}

fn left_eigen_rows(lambda: Complex64) -> ([f64; 4], [f64; 4]) {
    let w = [lambda.powi(3), lambda.powi(2), lambda, Complex64::new(1.0, 0.0)];
    (w.map(|c| c.re), w.map(|c| c.im))
}

impl GlobalBvp {
    fn a_rows(&self, left: bool) -> ([f64; 4], [f64; 4]) {
        let p = &self.params;
        let lambda = if left {
            2f64.powf(-0.25) * Complex64::new(-1.0, 1.0)
        } else {
            (p.delta / 2.0).sqrt() * Complex64::new(1.0, 1.0)
        };
        left_eigen_rows(lambda)
    }
}

impl BvpSystem for GlobalBvp {
    fn dim(&self) -> usize {
        7
    }
    fn output_dim(&self) -> usize {
        6
    }
    fn rhs(&self, _x: f64, y: &[f64], dy: &mut [f64]) {
        let s = State::from_slice(y);
        let f = vector_field(&s, &self.params);
        let g = first_integral_gradient(&s, &self.params);
        for i in 0..6 {
            dy[i] = f[i] + y[6] * g[i];
        }
        dy[6] = 0.0;
    }
    fn jacobian(&self, _x: f64, y: &[f64], jac: &mut [f64]) {
        let s = State::from_slice(y);
        let j = jacobian(&s, &self.params);
        let h = first_integral_hessian(&s, &self.params);
        let g = first_integral_gradient(&s, &self.params);
        jac.fill(0.0);
        for r in 0..6 {
            for c in 0..6 {
                jac[r * 7 + c] = j[(r, c)] + y[6] * h[(r, c)];
            }
            jac[r * 7 + 6] = g[r];
        }
    }
    fn left_count(&self) -> usize {
        3
    }
    fn left_bc(&self, y: &[f64], r: &mut [f64], jac: &mut [f64]) {
        let (re, im) = self.a_rows(true);
        let dev = [y[0] - self.sign_a, y[1], y[2], y[3]];
        r[0] = (0..4).map(|k| re[k] * dev[k]).sum();
        r[1] = (0..4).map(|k| im[k] * dev[k]).sum();
        let rate = self.params.epsilon * self.params.delta;
        r[2] = -rate * y[4] + y[5];
        jac[..4].copy_from_slice(&re);
        jac[7..11].copy_from_slice(&im);
        jac[14 + 4] = -rate;
        jac[14 + 5] = 1.0;
    }
    fn right_count(&self) -> usize {
        3
    }
    fn right_bc(&self, y: &[f64], r: &mut [f64], jac: &mut [f64]) {
        let (re, im) = self.a_rows(false);
        r[0] = (0..4).map(|k| re[k] * y[k]).sum();
        r[1] = (0..4).map(|k| im[k] * y[k]).sum();
        let rate = self.params.epsilon * 2f64.sqrt();
        r[2] = rate * (y[4] - self.sign_b) + y[5];
        jac[..4].copy_from_slice(&re);
        jac[7..11].copy_from_slice(&im);
        jac[14 + 4] = rate;
        jac[14 + 5] = 1.0;
    }
    fn interior_count(&self, node: usize) -> usize {
        usize::from(node == self.phase_node)
    }
    fn interior_bc(&self, _node: usize, y: &[f64], r: &mut [f64], jac: &mut [f64]) {
        r[0] = y[4] - self.sign_b / self.params.g.sqrt();
        jac[4] = 1.0;
    }
}

/// Residual of the multiple-shooting system for given node states.
pub fn global_residual(
    sys: &GlobalBvp,
    mesh: &[f64],
    nodes: &[Vec<f64>],
    cfg: &IntegratorConfig,
) -> Result<Vec<f64>> {
    crate::shooting::residual(sys, mesh, nodes, cfg)
}

/// Initial guess for the global problem.
pub struct GlobalGuess<'a> {
    p: Params,
    scale: InnerScale,
    corner: Option<&'a CornerMatch>,
    x_left: f64,
    x_right: f64,
    left_ratio: f64,
    right_c: Complex64,
}

impl<'a> GlobalGuess<'a> {
    pub fn new(p: &Params, corner: Option<&'a CornerMatch>, ctx: &MatchingContext) -> Self {
        let scale = InnerScale::new(corner_scale_constant(p.delta), p.epsilon);
        let mut g = Self {
            p: *p,
            scale,
            corner,
            x_left: scale.x_of_z(-ctx.a_minus),
            x_right: scale.x_of_z(ctx.a_plus),
            left_ratio: 1.0,
            right_c: Complex64::new(0.0, 0.0),
        };
        let al = g.corner_a(g.x_left);
        let slow = g.slow_a(g.x_left);
        g.left_ratio = if slow > 0.0 { al[0] / slow } else { 1.0 };
        let ar = g.corner_a(g.x_right);
        let dt = g.delta_tilde(g.x_right);
        let re = ar[0];
        let im = if dt > 0.0 { -ar[1] * 2f64.sqrt() / dt - re } else { 0.0 };
        g.right_c = Complex64::new(re, im);
        g
    }

    pub fn b(&self, x: f64) -> (f64, f64) {
        if x <= 0.0 {
            (singular_left_b(x, &self.p), singular_left_b_prime(x, &self.p))
        } else {
            (singular_right_b(x, &self.p), singular_right_b_prime(x, &self.p))
        }
    }

    fn slow_a(&self, x: f64) -> f64 {
        let b = self.b(x).0;
        (1.0 - self.p.g * b * b).max(0.0).sqrt()
    }

    fn delta_tilde(&self, x: f64) -> f64 {
        let b = self.b(x).0;
        (self.p.g * b * b - 1.0).max(0.0).powf(0.25)
    }

    fn corner_bar(&self, z: f64) -> [f64; 4] {
        match self.corner {
            Some(c) => c.eval(z),
            None => corner_guess(z),
        }
    }

    /// `A` and `A'` from the corner solution, with the curvature correction on the left.
    fn corner_a(&self, x: f64) -> [f64; 2] {
        let z = self.scale.z_of_x(x);
        let bar = self.corner_bar(z);
        let (_, a) = self.scale.to_outer(z, &bar);
        if x < 0.0 {
            let kappa = self.scale.k.powi(5) * self.p.epsilon;
            let b = self.b(x).0;
            let rho = ((1.0 - self.p.g * b * b) / (kappa * -x)).max(0.0);
            [a[0] * rho.sqrt(), a[1] * rho.sqrt()]
        } else {
            [a[0], a[1]]
        }
    }

    fn phase(&self, x: f64) -> f64 {
        let n = 64;
        let h = (x - self.x_right) / n as f64;
        let mut acc = 0.0;
        for i in 0..n {
            let t = self.x_right + (i as f64 + 0.5) * h;
            acc += self.delta_tilde(t) / 2f64.sqrt() * h;
        }
        acc
    }

    /// Guess of `A(x)`.
    pub fn a(&self, x: f64) -> f64 {
        if x < self.x_left {
            let relax = (-(self.x_left - x)).exp();
            self.slow_a(x) * (1.0 + (self.left_ratio - 1.0) * relax)
        } else if x <= self.x_right {
            self.corner_a(x)[0]
        } else {
            let th = self.phase(x);
            (self.right_c * Complex64::new(-th, th).exp()).re
        }
    }

    /// Guess of the full state at `x`.
    pub fn state(&self, x: f64) -> State {
        let h = 0.02;
        let f: Vec<f64> = (-2..=2).map(|k| self.a(x + k as f64 * h)).collect();
        let (b, b1) = self.b(x);
        State::new(
            f[2],
            (f[3] - f[1]) / (2.0 * h),
            (f[3] - 2.0 * f[2] + f[1]) / (h * h),
            (f[4] - 2.0 * f[3] + 2.0 * f[1] - f[0]) / (2.0 * h.powi(3)),
            b,
            b1,
        )
    }

    /// Abscissae of `z = -a_minus` and `z = a_plus`.
    pub fn corner_interval(&self) -> (f64, f64) {
        (self.x_left, self.x_right)
    }
}

/// Computed connection with diagnostics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HeteroclinicProfile {
    pub params: Params,
    pub xs: Vec<f64>,
    pub states: Vec<State>,
    /// First integral at every sample.
    pub w: Vec<f64>,
    /// Asymptotic junction abscissae `(-x_star, x_star_plus)`.
    pub junctions: [f64; 2],
    pub matching: Option<MatchingUnknowns>,
    pub matching_seed: Option<MatchingUnknowns>,
    /// Sup norm of the final shooting residual.
    pub residual: f64,
    /// Unfolding parameter at the solution.
    pub mu: f64,
    pub newton_iterations: usize,
    pub corner_iterations: usize,
    pub condition: Option<f64>,
    #[serde(skip)]
    pub solution: Option<Arc<ShootingSolution>>,
}

impl HeteroclinicProfile {
    /// Builds a profile from samples (for example read back from a file).
    pub fn from_samples(params: Params, xs: Vec<f64>, states: Vec<State>) -> Self {
        let w = states.iter().map(|s| first_integral(s, &params)).collect();
        Self {
            params,
            xs,
            states,
            w,
            junctions: [f64::NAN, f64::NAN],
            matching: None,
            matching_seed: None,
            residual: f64::NAN,
            mu: f64::NAN,
            newton_iterations: 0,
            corner_iterations: 0,
            condition: None,
            solution: None,
        }
    }

    pub fn sup_w(&self) -> f64 {
        self.w.iter().fold(0.0, |m, w| m.max(w.abs()))
    }

    /// State at `x`: dense output when available, otherwise cubic Hermite
    /// interpolation using the vector field as derivative.
    pub fn state_at(&self, x: f64) -> State {
        if let Some(sol) = &self.solution {
            let mut out = [0.0; 6];
            sol.eval_into(x, &mut out);
            return State(out);
        }
        let n = self.xs.len();
        let k = self.xs.partition_point(|&t| t <= x).clamp(1, n - 1);
        let (x0, x1) = (self.xs[k - 1], self.xs[k]);
        let h = x1 - x0;
        let t = ((x - x0) / h).clamp(0.0, 1.0);
        let (s0, s1) = (self.states[k - 1], self.states[k]);
        let (f0, f1) = (vector_field(&s0, &self.params), vector_field(&s1, &self.params));
        let h00 = 2.0 * t.powi(3) - 3.0 * t * t + 1.0;
        let h10 = t.powi(3) - 2.0 * t * t + t;
        let h01 = -2.0 * t.powi(3) + 3.0 * t * t;
        let h11 = t.powi(3) - t * t;
        State(std::array::from_fn(|i| {
            h00 * s0[i] + h10 * h * f0[i] + h01 * s1[i] + h11 * h * f1[i]
        }))
    }

    /// `A(0)`.
    pub fn a_at_zero(&self) -> f64 {
        self.state_at(0.0).a0()
    }

    /// First zero of `A0` for `x > 0`, the half-width of the corner.
    pub fn corner_half_width(&self) -> Option<f64> {
        let start = self.xs.partition_point(|&t| t <= 0.0);
        let mut prev_x = 0.0;
        let mut prev = self.state_at(0.0).a0();
        for i in start..self.xs.len() {
            let a = self.states[i].a0();
            if prev > 0.0 && a <= 0.0 {
                let x = bisect(|t| self.state_at(t).a0(), prev_x, self.xs[i], 1e-12);
                return Some(x);
            }
            prev = a;
            prev_x = self.xs[i];
        }
        None
    }

    /// Applies a symmetry to every sample.
    pub fn transformed(&self, map: Symmetry) -> Self {
        let mut out = self.clone();
        out.states = self.states.iter().map(|s| symmetry_apply(s, map)).collect();
        out.solution = None;
        out
    }

    /// Writes `x, A0, A1, A2, A3, B0, B1, W` with 17 significant digits.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        write_profile_csv(w, &self.xs, &self.states, &self.w)
    }

    /// Reads a profile written by [`HeteroclinicProfile::write_csv`].
    pub fn read_csv<R: std::io::Read>(params: Params, r: R) -> Result<Self> {
        let (xs, states) = read_profile_csv(r)?;
        Ok(Self::from_samples(params, xs, states))
    }
}

/// Everything produced by one global solve.
#[derive(Debug, Clone)]
pub struct HeteroclinicSolve {
    pub profile: HeteroclinicProfile,
    pub corner: Option<CornerMatch>,
    pub system: GlobalBvp,
}

/// Mesh of the global problem and the index of its node at `x = 0`.
pub fn global_mesh(p: &Params, cfg: &HeteroclinicConfig) -> (Vec<f64>, usize) {
    let l_minus = cfg.left_factor / (p.epsilon * p.delta);
    let l_plus = cfg.right_factor / (p.epsilon * 2f64.sqrt());
    let mesh = mesh_with_breaks(-l_minus, l_plus, &[0.0], cfg.segment);
    let k0 = mesh
        .iter()
        .position(|&x| x == 0.0)
        .expect("zero is a mesh node");
    (mesh, k0)
}

/// Computes the connection from `M-` to `M+`.
pub fn heteroclinic_solve(p: &Params, cfg: &HeteroclinicConfig) -> Result<HeteroclinicSolve> {
    if !(p.epsilon > 0.0) {
        return Err(Error::SingularEpsilon);
    }
    let ctx = MatchingContext::from_scaling(&cfg.scaling);
    let closed = matching_closed_form(ctx.rho())?;
    let seed = MatchingUnknowns::from_array(std::array::from_fn(|k| {
        closed.to_array()[k] * cfg.seed_scale[k]
    }));
    let corner_cfg = ShootingConfig {
        tol: 1e-11,
        ..cfg.shooting()
    };
    let corner = solve_corner_matching(&ctx, seed, &corner_cfg).ok();
    let guess = GlobalGuess::new(p, corner.as_ref(), &ctx);
    let (mesh, k0) = global_mesh(p, cfg);
    let nodes: Vec<Vec<f64>> = mesh
        .iter()
        .map(|&x| {
            let mut v = guess.state(x).0.to_vec();
            v.push(0.0);
            v
        })
        .collect();
    let sys = GlobalBvp {
        params: *p,
        phase_node: k0,
        sign_a: 1.0,
        sign_b: 1.0,
    };
    let sol = shoot(&sys, &mesh, nodes, &cfg.shooting())?;
    let mu = sol.nodes[0][6];
    let mut xs = Vec::new();
    let mut states = Vec::new();
    for j in 0..mesh.len() - 1 {
        let k = ((mesh[j + 1] - mesh[j]) / cfg.sample_spacing).ceil().max(1.0) as usize;
        for i in 0..k {
            let x = mesh[j] + (mesh[j + 1] - mesh[j]) * i as f64 / k as f64;
            let mut out = [0.0; 6];
            sol.segments[j].eval_into(x, &mut out);
            xs.push(x);
            states.push(State(out));
        }
    }
    let last = sol.segments.last().expect("segments").last();
    xs.push(*mesh.last().expect("mesh"));
    states.push(State::from_slice(&last[..6]));
    let w = states.iter().map(|s| first_integral(s, p)).collect();
    let profile = HeteroclinicProfile {
        params: *p,
        xs,
        states,
        w,
        junctions: [-cfg.scaling.x_star, cfg.scaling.x_star_plus],
        matching: corner.as_ref().map(|c| c.unknowns),
        matching_seed: Some(seed),
        residual: sol.residual,
        mu,
        newton_iterations: sol.iterations,
        corner_iterations: corner.as_ref().map_or(0, |c| c.iterations),
        condition: None,
        solution: Some(Arc::new(sol)),
    };
    Ok(HeteroclinicSolve {
        profile,
        corner,
        system: sys,
    })
}

/// Singular-value diagnostics of a converged connection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransversalityReport {
    /// Smallest singular value of the Newton matrix.
    pub sigma_min: f64,
    pub sigma_max: f64,
    /// `sigma_max / sigma_min` of the Newton matrix.
    pub condition: f64,
    /// Second smallest singular value of `[Q_u | Q_s]` at `x = 0`, where the
    /// columns are orthonormal bases of the unstable and stable tangent spaces.
    /// It measures the angle between the manifolds inside `W = 0`.
    pub splitting: Option<f64>,
    /// Smallest singular value of `[Q_u | Q_s]`; zero along the shared orbit direction.
    pub tangency: Option<f64>,
    /// True when the smallest relevant singular value is below `threshold`.
    pub degenerate: bool,
    pub threshold: f64,
}

/// Threshold under which the intersection is flagged as degenerate.
pub const DEGENERACY_THRESHOLD: f64 = 1e-6;

impl TransversalityReport {
    /// Report for a small dense matrix given row by row.
    pub fn from_dense(rows: &[Vec<f64>]) -> Self {
        let n = rows.len();
        let m = nalgebra::DMatrix::from_fn(n, n, |i, j| rows[i][j]);
        let sv = m.singular_values();
        let (lo, hi) = (sv.min(), sv.max());
        Self::build(lo, hi, None)
    }

    fn build(sigma_min: f64, sigma_max: f64, angles: Option<(f64, f64)>) -> Self {
        let splitting = angles.map(|a| a.0);
        let smallest = splitting.map_or(sigma_min, |s| s.min(sigma_min));
        Self {
            sigma_min,
            sigma_max,
            condition: sigma_max / sigma_min,
            splitting,
            tangency: angles.map(|a| a.1),
            degenerate: smallest < DEGENERACY_THRESHOLD,
            threshold: DEGENERACY_THRESHOLD,
        }
    }
}

/// Extreme singular values of a banded matrix by inverse and power iteration on `J^T J`.
pub fn band_singular_extremes(j: &BandMatrix, iterations: usize) -> Result<(f64, f64)> {
    let n = j.dim();
    let lu = j.factor()?;
    let mut v: Vec<f64> = (0..n).map(|i| 1.0 + 0.1 * ((i * 7919) % 13) as f64).collect();
    normalize(&mut v);
    let mut inv_norm = 0.0;
    for _ in 0..iterations {
        let mut w = v.clone();
        lu.solve_transpose(&mut w);
        lu.solve(&mut w);
        inv_norm = normalize(&mut w);
        v = w;
    }
    let sigma_min = 1.0 / inv_norm.sqrt();
    let mut v: Vec<f64> = (0..n).map(|i| 1.0 + 0.1 * ((i * 104729) % 17) as f64).collect();
    normalize(&mut v);
    let mut norm = 0.0;
    for _ in 0..iterations {
        let w = j.mul_vec(&v);
        let mut u = j.mul_transpose_vec(&w);
        norm = normalize(&mut u);
        v = u;
    }
    Ok((sigma_min, norm.sqrt()))
}

fn normalize(v: &mut [f64]) -> f64 {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
    n
}

/// Transversality diagnostics of a converged solve.
pub fn transversality(solve: &HeteroclinicSolve) -> Result<TransversalityReport> {
    let sol = solve
        .profile
        .solution
        .as_ref()
        .ok_or_else(|| Error::Domain("profile carries no Newton matrix".into()))?;
    let (lo, hi) = band_singular_extremes(&sol.jacobian, 200)?;
    let angles = manifold_splitting(&solve.system, sol).ok();
    Ok(TransversalityReport::build(lo, hi, angles))
}

/// Monodromy of segment `j` restricted to the six state components, read off the Newton matrix.
fn segment_monodromy(sys: &GlobalBvp, sol: &ShootingSolution, j: usize) -> DMatrix<f64> {
    let n = sys.dim();
    let r0 = sys.left_count() + (1..=j).map(|k| sys.interior_count(k)).sum::<usize>() + j * n;
    DMatrix::from_fn(6, 6, |r, c| sol.jacobian.get(r0 + r, j * n + c))
}

/// Orthonormal basis of the null space of the given rows (each of length 6).
fn null_space(rows: &DMatrix<f64>) -> DMatrix<f64> {
    let k = rows.nrows();
    let gram = rows * rows.transpose();
    let inv = gram.try_inverse().unwrap_or_else(|| DMatrix::identity(k, k));
    let proj = DMatrix::<f64>::identity(6, 6) - rows.transpose() * inv * rows;
    let eig = nalgebra::SymmetricEigen::new(proj);
    let mut idx: Vec<usize> = (0..6).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    DMatrix::from_fn(6, 6 - k, |r, c| eig.eigenvectors[(r, idx[c])])
}

fn orthonormal(m: DMatrix<f64>) -> DMatrix<f64> {
    m.qr().q()
}

/// `(sigma_5, sigma_6)` of `[Q_u | Q_s]` at the phase node.
fn manifold_splitting(sys: &GlobalBvp, sol: &ShootingSolution) -> Result<(f64, f64)> {
    let n = sys.dim();
    let m = sol.mesh.len() - 1;
    let bc_rows = |left: bool| {
        let y = if left { &sol.nodes[0] } else { &sol.nodes[m] };
        let mut r = vec![0.0; 3];
        let mut jac = vec![0.0; 3 * n];
        if left {
            sys.left_bc(y, &mut r, &mut jac);
        } else {
            sys.right_bc(y, &mut r, &mut jac);
        }
        DMatrix::from_fn(3, 6, |i, c| jac[i * n + c])
    };
    let mut qu = null_space(&bc_rows(true));
    for j in 0..sys.phase_node {
        qu = orthonormal(segment_monodromy(sys, sol, j) * qu);
    }
    let mut qs = null_space(&bc_rows(false));
    for j in (sys.phase_node..m).rev() {
        let phi = segment_monodromy(sys, sol, j);
        let back = phi.lu().solve(&qs).ok_or(Error::Singular(j))?;
        qs = orthonormal(back);
    }
    let mut joint = DMatrix::zeros(6, 6);
    joint.view_mut((0, 0), (6, 3)).copy_from(&qu);
    joint.view_mut((0, 3), (6, 3)).copy_from(&qs);
    let mut sv: Vec<f64> = joint.singular_values().iter().copied().collect();
    sv.sort_by(f64::total_cmp);
    Ok((sv[1], sv[0]))
}
