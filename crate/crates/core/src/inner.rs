//! The corner layer `A'''' = -A (A^2 + z)` on `[-a_minus, a_plus]`, its
//! boundary families, a Picard solver for the Volterra form anchored at the
//! right end, the leftward extension cascade and the scaling to the outer
//! variables.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::dynamics::State;
use crate::error::{Error, Result};

/// Side of the corner interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    /// `z = +a_plus`, matched to the stable manifold of `M+`.
    Plus,
    /// `z = -a_minus`, matched to the unstable manifold of `M-`.
    Minus,
}

/// Boundary values `(A, A', A'', A''')` of one family at its end of the interval.
pub fn boundary_family(side: Side, tangent: [f64; 2], a: f64) -> [f64; 4] {
    let [t1, t2] = tangent;
    let r = 2f64.sqrt();
    match side {
        Side::Plus => [
            a.sqrt() * t1,
            -a.powf(0.75) / r * (t1 + t2),
            a * t2,
            a.powf(1.25) / r * (t1 - t2),
        ],
        Side::Minus => [
            a.sqrt() * (1.0 + 2f64.powf(-0.75) * (t1 - t2)),
            a.powf(0.75) * t1,
            a / 2f64.powf(0.25) * (t1 + t2),
            r * a.powf(1.25) * t2,
        ],
    }
}

/// Derivative of [`boundary_family`] with respect to the two tangent parameters.
pub fn boundary_family_jacobian(side: Side, a: f64) -> [[f64; 2]; 4] {
    let r = 2f64.sqrt();
    match side {
        Side::Plus => [
            [a.sqrt(), 0.0],
            [-a.powf(0.75) / r, -a.powf(0.75) / r],
            [0.0, a],
            [a.powf(1.25) / r, -a.powf(1.25) / r],
        ],
        Side::Minus => {
            let c = a.sqrt() * 2f64.powf(-0.75);
            let d = a / 2f64.powf(0.25);
            [[c, -c], [a.powf(0.75), 0.0], [d, d], [0.0, r * a.powf(1.25)]]
        }
    }
}

/// Boundary values after checking the tangent parameters against their ball.
pub fn assemble_boundary(side: Side, tangent: [f64; 2], a: f64, radius: f64) -> Result<[f64; 4]> {
    let norm = tangent[0].hypot(tangent[1]);
    if norm > radius * (1.0 + 1e-12) {
        return Err(Error::BallViolation { norm, radius });
    }
    if !(a > 0.0) {
        return Err(Error::Domain(format!("half-width must be positive, got {a}")));
    }
    Ok(boundary_family(side, tangent, a))
}

/// Corner-layer problem anchored at `z = a_plus`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InnerProblem {
    pub a_minus: f64,
    pub a_plus: f64,
    /// `(A, A', A'', A''')` at `z = a_plus`.
    pub data_plus: [f64; 4],
    /// Number of grid points over `[-a_minus, a_plus]`.
    pub grid_points: usize,
    pub tol: f64,
    pub max_iter: usize,
}

impl InnerProblem {
    pub fn new(a_minus: f64, a_plus: f64, data_plus: [f64; 4]) -> Self {
        Self {
            a_minus,
            a_plus,
            data_plus,
            grid_points: 2048,
            tol: 1e-12,
            max_iter: 200,
        }
    }

    /// Contraction constant `2 a_plus^5 / 3` of the first Picard step.
    pub fn contraction_constant(&self) -> f64 {
        2.0 * self.a_plus.powi(5) / 3.0
    }

    fn spacing(&self) -> f64 {
        (self.a_minus + self.a_plus) / (self.grid_points.max(4) - 1) as f64
    }
}

/// Sampled corner-layer solution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InnerSolution {
    pub z: Vec<f64>,
    /// `(A, A', A'', A''')` at every grid point.
    pub values: Vec<[f64; 4]>,
    /// Pointwise `|A'''' + A (A^2 + z)|` from the integral representation.
    pub residual: Vec<f64>,
    /// Sup-norm Picard deltas, concatenated over stages.
    pub history: Vec<f64>,
    /// Intervals `[left, right]` solved by successive Picard stages.
    pub stages: Vec<[f64; 2]>,
    /// Number of cascade steps used to reach the left end.
    pub cascade_steps: usize,
    pub a_minus: f64,
    pub a_plus: f64,
}

impl InnerSolution {
    /// Ratios of consecutive Picard deltas of the first stage.
    pub fn delta_ratios(&self, stage_len: usize) -> Vec<f64> {
        self.history[..stage_len.min(self.history.len())]
            .windows(2)
            .filter(|w| w[0] > 0.0)
            .map(|w| w[1] / w[0])
            .collect()
    }

    /// Linear interpolation of `A` on the grid.
    pub fn value_at(&self, z: f64) -> [f64; 4] {
        let k = self.z.partition_point(|&t| t <= z).clamp(1, self.z.len() - 1);
        let (z0, z1) = (self.z[k - 1], self.z[k]);
        let w = ((z - z0) / (z1 - z0)).clamp(0.0, 1.0);
        let (u, v) = (self.values[k - 1], self.values[k]);
        std::array::from_fn(|j| (1.0 - w) * u[j] + w * v[j])
    }

    /// Writes `z, A, A', A'', A''', residual` with 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "z,A,A',A'',A''',residual")?;
        for ((z, v), r) in self.z.iter().zip(&self.values).zip(&self.residual) {
            writeln!(
                w,
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                z, v[0], v[1], v[2], v[3], r
            )?;
        }
        Ok(())
    }
}

fn nonlinearity(a: f64, z: f64) -> f64 {
    a * (a * a + z)
}

/// Cumulative integrals `int_{z_i}^{b} f ds` on a uniform grid, fourth order.
pub(crate) fn cumulative_from_right(f: &[f64], h: f64, out: &mut [f64]) {
    let n = f.len();
    out[n - 1] = 0.0;
    for i in (0..n - 1).rev() {
        let piece = if n < 4 {
            0.5 * h * (f[i] + f[i + 1])
        } else if i == 0 {
            h / 24.0 * (9.0 * f[0] + 19.0 * f[1] - 5.0 * f[2] + f[3])
        } else if i == n - 2 {
            h / 24.0 * (f[n - 4] - 5.0 * f[n - 3] + 19.0 * f[n - 2] + 9.0 * f[n - 1])
        } else {
            h / 24.0 * (-f[i - 1] + 13.0 * f[i] + 13.0 * f[i + 1] - f[i + 2])
        };
        out[i] = out[i + 1] + piece;
    }
}

/// One application of the Volterra map on a uniform grid ending at the anchor.
fn volterra_map(z: &[f64], data: &[f64; 4], a_prev: &[f64], out: &mut [[f64; 4]]) {
    let n = z.len();
    let b = z[n - 1];
    let h = (b - z[0]) / (n - 1) as f64;
    let c = 0.5 * (z[0] + b);
    let nl: Vec<f64> = a_prev.iter().zip(z).map(|(&a, &s)| nonlinearity(a, s)).collect();
    let mut moments = vec![vec![0.0; n]; 4];
    let mut g = vec![0.0; n];
    for (k, m) in moments.iter_mut().enumerate() {
        for i in 0..n {
            g[i] = (z[i] - c).powi(k as i32) * nl[i];
        }
        cumulative_from_right(&g, h, m);
    }
    for i in 0..n {
        let d = z[i] - b;
        let t = z[i] - c;
        let [f0, f1, f2, f3] = [moments[0][i], moments[1][i], moments[2][i], moments[3][i]];
        let taylor = [
            data[0] + d * data[1] + d * d / 2.0 * data[2] + d * d * d / 6.0 * data[3],
            data[1] + d * data[2] + d * d / 2.0 * data[3],
            data[2] + d * data[3],
            data[3],
        ];
        out[i] = [
            taylor[0] + (t * t * t * f0 - 3.0 * t * t * f1 + 3.0 * t * f2 - f3) / 6.0,
            taylor[1] + (t * t * f0 - 2.0 * t * f1 + f2) / 2.0,
            taylor[2] + t * f0 - f1,
            taylor[3] + f0,
        ];
    }
}

struct StageResult {
    values: Vec<[f64; 4]>,
    residual: Vec<f64>,
    history: Vec<f64>,
}

/// Picard iteration on one interval anchored at its right end.
fn picard_interval(z: &[f64], data: &[f64; 4], tol: f64, max_iter: usize) -> Result<StageResult> {
    let n = z.len();
    let mut cur = vec![[0.0; 4]; n];
    volterra_map(z, data, &vec![0.0; n], &mut cur);
    let mut next = vec![[0.0; 4]; n];
    let mut history = Vec::new();
    let mut prev_a: Vec<f64> = cur.iter().map(|v| v[0]).collect();
    for _ in 0..max_iter {
        volterra_map(z, data, &prev_a, &mut next);
        let delta = next
            .iter()
            .zip(&cur)
            .fold(0.0f64, |m, (u, v)| m.max((u[0] - v[0]).abs()));
        history.push(delta);
        if !delta.is_finite() || delta > 1e8 {
            return Err(Error::NonConvergence {
                iterations: history.len(),
                last: delta,
                history,
            });
        }
        let residual: Vec<f64> = next
            .iter()
            .zip(&prev_a)
            .zip(z)
            .map(|((v, &a_old), &s)| (nonlinearity(v[0], s) - nonlinearity(a_old, s)).abs())
            .collect();
        std::mem::swap(&mut cur, &mut next);
        prev_a = cur.iter().map(|v| v[0]).collect();
        if delta < tol {
            return Ok(StageResult {
                values: cur,
                residual,
                history,
            });
        }
    }
    Err(Error::NonConvergence {
        iterations: history.len(),
        last: *history.last().unwrap_or(&f64::NAN),
        history,
    })
}

fn uniform(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}

/// Solves the corner problem on `[-a_plus, a_plus]` by Picard iteration.
pub fn picard_solve(prob: &InnerProblem) -> Result<InnerSolution> {
    let constant = prob.contraction_constant();
    if constant >= 1.0 {
        return Err(Error::ContractionViolated { constant });
    }
    let h = prob.spacing();
    let n = ((2.0 * prob.a_plus / h).round() as usize + 1).max(4);
    let z = uniform(-prob.a_plus, prob.a_plus, n);
    let st = picard_interval(&z, &prob.data_plus, prob.tol, prob.max_iter)?;
    Ok(InnerSolution {
        z,
        values: st.values,
        residual: st.residual,
        history: st.history,
        stages: vec![[-prob.a_plus, prob.a_plus]],
        cascade_steps: 0,
        a_minus: prob.a_minus,
        a_plus: prob.a_plus,
    })
}

/// Relative stage length `X` solving `X^5/80 + X^4/16 = 1/2`.
pub fn cascade_step() -> f64 {
    let f = |x: f64| x.powi(5) / 80.0 + x.powi(4) / 16.0 - 0.5;
    crate::integrate::bisect(f, 0.0, 2.0, 1e-15)
}

/// Number of cascade steps `max(1, ceil(ln(a_minus/a_plus) / ln(1 + X)))`.
pub fn cascade_count(a_minus: f64, a_plus: f64) -> usize {
    let ratio = (a_minus / a_plus).max(1.0);
    ((ratio.ln() / (1.0 + cascade_step()).ln()).ceil() as usize).max(1)
}

/// Extends a solution leftward to `-a_minus` through the geometric cascade
/// `a_(k+1) = a_k (1 + X)`; a stage whose iteration fails is split in halves.
pub fn picard_extend(sol: &InnerSolution, a_minus: f64, prob: &InnerProblem) -> Result<InnerSolution> {
    let mut out = sol.clone();
    out.a_minus = a_minus;
    let left = -a_minus;
    let h = prob.spacing();
    let x = cascade_step();
    let steps = cascade_count(a_minus, -sol.z[0]);
    out.cascade_steps = steps;
    let mut a_k = -sol.z[0];
    for _ in 0..steps {
        let target = (-(a_k * (1.0 + x))).max(left);
        let mut from = -a_k;
        while from > target {
            let mut to = target;
            loop {
                let n = (((from - to) / h).ceil() as usize + 1).max(4);
                let z = uniform(to, from, n);
                let data = out.values[0];
                match picard_interval(&z, &data, prob.tol, prob.max_iter) {
                    Ok(st) => {
                        prepend(&mut out, z, st);
                        break;
                    }
                    Err(e) => {
                        if from - to < 1e-3 {
                            return Err(e);
                        }
                        to = 0.5 * (from + to);
                    }
                }
            }
            from = to;
        }
        a_k = -target;
    }
    Ok(out)
}

fn prepend(out: &mut InnerSolution, z: Vec<f64>, st: StageResult) {
    let n = z.len();
    out.stages.insert(0, [z[0], z[n - 1]]);
    out.history.extend_from_slice(&st.history);
    let mut zs = z[..n - 1].to_vec();
    zs.extend_from_slice(&out.z);
    out.z = zs;
    let mut vs = st.values[..n - 1].to_vec();
    vs.extend_from_slice(&out.values);
    out.values = vs;
    let mut rs = st.residual[..n - 1].to_vec();
    rs.extend_from_slice(&out.residual);
    out.residual = rs;
}

/// Sup norm of the pointwise residual.
pub fn inner_residual(sol: &InnerSolution) -> f64 {
    sol.residual.iter().fold(0.0, |m, r| m.max(*r))
}

/// The map `z = K eps^(1/5) x`, `A^(j) = K^(2+j) eps^((2+j)/5) Abar^(j)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InnerScale {
    pub k: f64,
    pub epsilon: f64,
}

impl InnerScale {
    pub fn new(k: f64, epsilon: f64) -> Self {
        Self { k, epsilon }
    }

    fn unit(&self) -> f64 {
        self.k * self.epsilon.powf(0.2)
    }

    pub fn z_of_x(&self, x: f64) -> f64 {
        self.unit() * x
    }

    pub fn x_of_z(&self, z: f64) -> f64 {
        z / self.unit()
    }

    /// `(z, Abar, Abar', Abar'', Abar''')` from an outer state at `x`.
    pub fn to_inner(&self, x: f64, s: &State) -> (f64, [f64; 4]) {
        let u = self.unit();
        (
            u * x,
            std::array::from_fn(|j| s[j] / u.powi(2 + j as i32)),
        )
    }

    /// `(x, A0, A1, A2, A3)` from corner variables.
    pub fn to_outer(&self, z: f64, abar: &[f64; 4]) -> (f64, [f64; 4]) {
        let u = self.unit();
        (z / u, std::array::from_fn(|j| abar[j] * u.powi(2 + j as i32)))
    }
}
