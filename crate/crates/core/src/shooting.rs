//! Multiple shooting for two-point boundary-value problems with separated
//! boundary conditions and optional interior conditions at mesh nodes.
//!
//! Unknowns are the states at every node. Each segment is integrated with
//! its variational equations; the resulting block-bidiagonal Newton system
//! is banded and solved by [`crate::band`]. Constant parameters are carried
//! as extra state components with zero derivative, so every row only
//! couples neighbouring nodes.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::band::{BandLu, BandMatrix};
use crate::error::{Error, Result};
use crate::integrate::{solve, IntegratorConfig, OdeRhs, Solution};

/// A boundary-value problem on a fixed mesh.
pub trait BvpSystem: Sync {
    /// Dimension of the (augmented) state.
    fn dim(&self) -> usize;
    /// Number of components kept in dense output and sampled profiles.
    fn output_dim(&self) -> usize {
        self.dim()
    }
    fn rhs(&self, x: f64, y: &[f64], dy: &mut [f64]);
    /// Row-major Jacobian of [`BvpSystem::rhs`].
    fn jacobian(&self, x: f64, y: &[f64], jac: &mut [f64]);
    /// Number of conditions on the first node.
    fn left_count(&self) -> usize;
    /// Left conditions and their row-major Jacobian (`left_count x dim`).
    fn left_bc(&self, y: &[f64], r: &mut [f64], jac: &mut [f64]);
    /// Number of conditions on the last node.
    fn right_count(&self) -> usize;
    fn right_bc(&self, y: &[f64], r: &mut [f64], jac: &mut [f64]);
    /// Number of conditions attached to interior node `k`.
    fn interior_count(&self, _node: usize) -> usize {
        0
    }
    fn interior_bc(&self, _node: usize, _y: &[f64], _r: &mut [f64], _jac: &mut [f64]) {}
}

/// Newton and integration settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShootingConfig {
    pub integrator: IntegratorConfig,
    /// Convergence threshold on the sup norm of the residual.
    pub tol: f64,
    pub max_iter: usize,
    /// Maximal number of step halvings in the line search.
    pub max_halvings: usize,
}

impl Default for ShootingConfig {
    fn default() -> Self {
        Self {
            integrator: IntegratorConfig {
                rel_tol: 1e-11,
                abs_tol: 1e-13,
                max_step: 0.5,
                ..IntegratorConfig::default()
            },
            tol: 1e-10,
            max_iter: 25,
            max_halvings: 30,
        }
    }
}

/// Converged multiple-shooting solution.
#[derive(Debug, Clone)]
pub struct ShootingSolution {
    pub mesh: Vec<f64>,
    /// States at the nodes.
    pub nodes: Vec<Vec<f64>>,
    /// Per-segment integrations of the state alone, with dense output.
    pub segments: Vec<Solution>,
    pub iterations: usize,
    pub residual_history: Vec<f64>,
    pub residual: f64,
    /// Newton matrix at the solution.
    pub jacobian: BandMatrix,
}

impl ShootingSolution {
    /// Dense-output evaluation of the first `out.len()` components.
    pub fn eval_into(&self, x: f64, out: &mut [f64]) {
        let m = self.segments.len();
        let k = self.mesh.partition_point(|&t| t <= x).saturating_sub(1).min(m - 1);
        self.segments[k].eval_into(x, out);
    }
}

struct Variational<'a, S: BvpSystem + ?Sized> {
    sys: &'a S,
    jac: std::cell::RefCell<Vec<f64>>,
}

impl<S: BvpSystem + ?Sized> OdeRhs for Variational<'_, S> {
    fn dim(&self) -> usize {
        let n = self.sys.dim();
        n + n * n
    }
    fn eval(&self, x: f64, y: &[f64], dy: &mut [f64]) {
        let n = self.sys.dim();
        self.sys.rhs(x, &y[..n], &mut dy[..n]);
        let mut jac = self.jac.borrow_mut();
        self.sys.jacobian(x, &y[..n], &mut jac);
        let phi = &y[n..];
        let dphi = &mut dy[n..];
        for i in 0..n {
            for j in 0..n {
                let mut acc = 0.0;
                for k in 0..n {
                    acc += jac[i * n + k] * phi[k * n + j];
                }
                dphi[i * n + j] = acc;
            }
        }
    }
}

struct StateOnly<'a, S: BvpSystem + ?Sized>(&'a S);

impl<S: BvpSystem + ?Sized> OdeRhs for StateOnly<'_, S> {
    fn dim(&self) -> usize {
        self.0.dim()
    }
    fn eval(&self, x: f64, y: &[f64], dy: &mut [f64]) {
        self.0.rhs(x, y, dy)
    }
}

fn propagate<S: BvpSystem + ?Sized>(
    sys: &S,
    x0: f64,
    x1: f64,
    y0: &[f64],
    cfg: &IntegratorConfig,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = sys.dim();
    let mut init = vec![0.0; n + n * n];
    init[..n].copy_from_slice(y0);
    for i in 0..n {
        init[n + i * n + i] = 1.0;
    }
    let rhs = Variational {
        sys,
        jac: std::cell::RefCell::new(vec![0.0; n * n]),
    };
    let cfg = IntegratorConfig {
        control_dim: Some(n),
        dense_dim: Some(0),
        ..*cfg
    };
    let sol = solve(&rhs, x0, &init, x1, &cfg)?;
    let end = sol.last();
    Ok((end[..n].to_vec(), end[n..].to_vec()))
}

/// Integrates every segment from the given node states, state only, with dense output.
pub fn integrate_segments<S: BvpSystem + ?Sized>(
    sys: &S,
    mesh: &[f64],
    nodes: &[Vec<f64>],
    cfg: &IntegratorConfig,
) -> Result<Vec<Solution>> {
    let cfg = IntegratorConfig {
        dense_dim: Some(sys.output_dim()),
        ..*cfg
    };
    (0..mesh.len() - 1)
        .into_par_iter()
        .map(|j| solve(&StateOnly(sys), mesh[j], &nodes[j], mesh[j + 1], &cfg))
        .collect()
}

struct Assembly {
    residual: Vec<f64>,
    matrix: Option<BandMatrix>,
}

fn assemble<S: BvpSystem + ?Sized>(
    sys: &S,
    mesh: &[f64],
    nodes: &[Vec<f64>],
    cfg: &IntegratorConfig,
    with_matrix: bool,
) -> Result<Assembly> {
    let n = sys.dim();
    let m = mesh.len() - 1;
    let shots: Vec<(Vec<f64>, Vec<f64>)> = if with_matrix {
        (0..m)
            .into_par_iter()
            .map(|j| propagate(sys, mesh[j], mesh[j + 1], &nodes[j], cfg))
            .collect::<Result<_>>()?
    } else {
        integrate_segments(sys, mesh, nodes, cfg)?
            .into_iter()
            .map(|s| (s.last().to_vec(), Vec::new()))
            .collect()
    };
    let mut residual = Vec::with_capacity((m + 1) * n);
    let mut trip: Vec<(usize, usize, f64)> = Vec::new();
    let mut row = 0usize;
    let mut push_rows = |count: usize,
                         col0: usize,
                         f: &mut dyn FnMut(&mut [f64], &mut [f64]),
                         residual: &mut Vec<f64>,
                         trip: &mut Vec<(usize, usize, f64)>| {
        let mut r = vec![0.0; count];
        let mut jac = vec![0.0; count * n];
        f(&mut r, &mut jac);
        for i in 0..count {
            residual.push(r[i]);
            if with_matrix {
                for c in 0..n {
                    let v = jac[i * n + c];
                    if v != 0.0 {
                        trip.push((row + i, col0 + c, v));
                    }
                }
            }
        }
        row += count;
        row - count
    };
    push_rows(
        sys.left_count(),
        0,
        &mut |r, jac| sys.left_bc(&nodes[0], r, jac),
        &mut residual,
        &mut trip,
    );
    for j in 0..m {
        let cnt = if j == 0 { 0 } else { sys.interior_count(j) };
        if cnt > 0 {
            push_rows(
                cnt,
                j * n,
                &mut |r, jac| sys.interior_bc(j, &nodes[j], r, jac),
                &mut residual,
                &mut trip,
            );
        }
        let (end, phi) = &shots[j];
        let r0 = push_rows(
            n,
            j * n,
            &mut |r, jac| {
                for i in 0..n {
                    r[i] = end[i] - nodes[j + 1][i];
                    if with_matrix {
                        jac[i * n..(i + 1) * n].copy_from_slice(&phi[i * n..(i + 1) * n]);
                    }
                }
            },
            &mut residual,
            &mut trip,
        );
        if with_matrix {
            for i in 0..n {
                trip.push((r0 + i, (j + 1) * n + i, -1.0));
            }
        }
    }
    push_rows(
        sys.right_count(),
        m * n,
        &mut |r, jac| sys.right_bc(&nodes[m], r, jac),
        &mut residual,
        &mut trip,
    );
    if residual.len() != (m + 1) * n {
        return Err(Error::Domain(format!(
            "boundary-value problem is not square: {} conditions for {} unknowns",
            residual.len(),
            (m + 1) * n
        )));
    }
    let matrix = with_matrix.then(|| BandMatrix::from_triplets((m + 1) * n, &trip));
    Ok(Assembly { residual, matrix })
}

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Residual of the shooting system at the given node states.
pub fn residual<S: BvpSystem + ?Sized>(
    sys: &S,
    mesh: &[f64],
    nodes: &[Vec<f64>],
    cfg: &IntegratorConfig,
) -> Result<Vec<f64>> {
    Ok(assemble(sys, mesh, nodes, cfg, false)?.residual)
}

/// Damped Newton iteration for the multiple-shooting system.
pub fn shoot<S: BvpSystem + ?Sized>(
    sys: &S,
    mesh: &[f64],
    guess: Vec<Vec<f64>>,
    cfg: &ShootingConfig,
) -> Result<ShootingSolution> {
    let n = sys.dim();
    if mesh.len() < 2 || guess.len() != mesh.len() || guess.iter().any(|g| g.len() != n) {
        return Err(Error::Domain(
            "mesh and initial guess do not match the system dimension".into(),
        ));
    }
    if sys.left_count() + sys.right_count() + (1..mesh.len() - 1).map(|k| sys.interior_count(k)).sum::<usize>() != n {
        return Err(Error::Domain("boundary conditions do not close the problem".into()));
    }
    let mut nodes = guess;
    let mut history = Vec::new();
    let mut asm = assemble(sys, mesh, &nodes, &cfg.integrator, true)?;
    let mut res = sup(&asm.residual);
    history.push(res);
    let mut iterations = 0;
    let mut lu: Option<BandLu>;
    loop {
        let matrix = asm.matrix.take().expect("assembled with matrix");
        if res < cfg.tol {
            return finish(sys, mesh, nodes, cfg, iterations, history, res, matrix);
        }
        if iterations >= cfg.max_iter {
            return Err(Error::NewtonDivergence {
                iterations,
                residual: res,
                condition: f64::NAN,
            });
        }
        lu = Some(matrix.factor()?);
        let mut step: Vec<f64> = asm.residual.iter().map(|v| -v).collect();
        lu.as_ref().expect("factored").solve(&mut step);
        let mut lambda = 1.0;
        let mut accepted = None;
        for _ in 0..=cfg.max_halvings {
            let trial: Vec<Vec<f64>> = nodes
                .iter()
                .enumerate()
                .map(|(k, s)| (0..n).map(|i| s[i] + lambda * step[k * n + i]).collect())
                .collect();
            match assemble(sys, mesh, &trial, &cfg.integrator, false) {
                Ok(a) => {
                    let r = sup(&a.residual);
                    if r.is_finite() && (r < (1.0 - 0.1 * lambda) * res || r < cfg.tol) {
                        accepted = Some(trial);
                        break;
                    }
                }
                Err(_) => {}
            }
            lambda *= 0.5;
        }
        iterations += 1;
        let Some(trial) = accepted else {
            return Err(Error::NewtonDivergence {
                iterations,
                residual: res,
                condition: f64::NAN,
            });
        };
        nodes = trial;
        asm = assemble(sys, mesh, &nodes, &cfg.integrator, true)?;
        res = sup(&asm.residual);
        history.push(res);
        drop(lu.take());
    }
}

#[allow(clippy::too_many_arguments)]
fn finish<S: BvpSystem + ?Sized>(
    sys: &S,
    mesh: &[f64],
    nodes: Vec<Vec<f64>>,
    cfg: &ShootingConfig,
    iterations: usize,
    history: Vec<f64>,
    residual: f64,
    jacobian: BandMatrix,
) -> Result<ShootingSolution> {
    let segments = integrate_segments(sys, mesh, &nodes, &cfg.integrator)?;
    Ok(ShootingSolution {
        mesh: mesh.to_vec(),
        nodes,
        segments,
        iterations,
        residual_history: history,
        residual,
        jacobian,
    })
}

/// Uniform-ish mesh from `a` to `b` with the given interior breakpoints and a maximal spacing.
pub fn mesh_with_breaks(a: f64, b: f64, breaks: &[f64], max_len: f64) -> Vec<f64> {
    let mut pts: Vec<f64> = std::iter::once(a)
        .chain(breaks.iter().copied().filter(|&t| t > a && t < b))
        .chain(std::iter::once(b))
        .collect();
    pts.sort_by(|u, v| u.partial_cmp(v).expect("finite mesh"));
    let mut mesh = vec![pts[0]];
    for w in pts.windows(2) {
        let k = ((w[1] - w[0]) / max_len).ceil().max(1.0) as usize;
        for i in 1..=k {
            mesh.push(if i == k {
                w[1]
            } else {
                w[0] + (w[1] - w[0]) * i as f64 / k as f64
            });
        }
    }
    mesh
}
