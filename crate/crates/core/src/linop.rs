//! Linearisation about a computed connection.
//!
//! With `B = C + iD` the linearised system splits into
//!
//! ```text
//! M (A, C) = ( -A'''' + (1 - 3A*^2 - gB*^2) A - 2g A* B* C,
//!              eps^-2 C'' + (1 - gA*^2 - 3B*^2) C - 2g A* B* A )
//! L D      =   eps^-2 D'' + (1 - gA*^2 - B*^2) D
//! ```
//!
//! Both are discretised on a uniform grid with central stencils. `M` is stored
//! with interleaved unknowns `(A_0, C_0, A_1, C_1, ...)`.

use serde::{Deserialize, Serialize};

use crate::band::BandMatrix;
use crate::connect::HeteroclinicProfile;
use crate::error::{Error, Result};
use crate::inner::cumulative_from_right;
use crate::params::Params;

/// Which linearised operator a matrix represents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OperatorKind {
    /// The coupled `(A, C)` operator.
    M,
    /// The decoupled `D` operator.
    L,
}

impl OperatorKind {
    pub fn components(self) -> usize {
        match self {
            Self::M => 2,
            Self::L => 1,
        }
    }
}

/// Treatment of stencil points outside the grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Closure {
    /// Ghost values are zero; keeps the matrix symmetric.
    Clamped,
    /// Ghost values follow the decaying modes of the constant-coefficient
    /// operator frozen at the end point.
    DecayingMode,
}

/// Uniform grid on which an operator is assembled.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub h: f64,
    pub closure: Closure,
}

impl GridSpec {
    /// Grid covering the sampled range of `profile` with spacing close to `h`.
    pub fn over(profile: &HeteroclinicProfile, h: f64) -> Self {
        Self {
            x_min: profile.xs[0],
            x_max: *profile.xs.last().expect("non-empty profile"),
            h,
            closure: Closure::DecayingMode,
        }
    }

    /// Grid abscissae; the spacing is adjusted to fit the interval exactly.
    pub fn abscissae(&self) -> Vec<f64> {
        let n = ((self.x_max - self.x_min) / self.h).round().max(4.0) as usize;
        let h = (self.x_max - self.x_min) / n as f64;
        (0..=n)
            .map(|i| if i == n { self.x_max } else { self.x_min + h * i as f64 })
            .collect()
    }
}

/// Largest admissible spacing: eight points per shortest linear wavelength `2 pi / sqrt(delta)` at `M+`.
pub fn spacing_limit(p: &Params) -> f64 {
    2.0 * std::f64::consts::PI / p.delta.sqrt() / 8.0
}

/// A linearised operator on a uniform grid.
#[derive(Debug, Clone)]
pub struct GridOperator {
    pub kind: OperatorKind,
    pub xs: Vec<f64>,
    pub h: f64,
    pub closure: Closure,
    pub matrix: BandMatrix,
    /// Exponential weight `eta` when the operator is conjugated by `exp(eta |x|)`.
    pub weight: Option<f64>,
}

impl GridOperator {
    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        self.matrix.mul_vec(u)
    }

    pub fn unknowns(&self) -> usize {
        self.matrix.dim()
    }

    /// Whether unknown `row` has its full stencil inside the grid.
    pub fn is_interior_row(&self, row: usize) -> bool {
        let c = self.kind.components();
        let i = row / c;
        let reach = if self.kind == OperatorKind::M && row % 2 == 0 { 2 } else { 1 };
        i >= reach && i + reach < self.xs.len()
    }

    /// `W M W^-1` with `W = diag(exp(eta |x|))`.
    pub fn weighted(&self, eta: f64) -> GridOperator {
        let c = self.kind.components();
        let n = self.unknowns();
        let w: Vec<f64> = (0..n).map(|r| (eta * self.xs[r / c].abs()).exp()).collect();
        let (kl, ku) = self.matrix.bandwidths();
        let mut m = BandMatrix::zeros(n, kl, ku);
        for r in 0..n {
            for col in r.saturating_sub(kl)..=(r + ku).min(n - 1) {
                let v = self.matrix.get(r, col);
                if v != 0.0 {
                    m.set(r, col, v * w[r] / w[col]);
                }
            }
        }
        GridOperator {
            matrix: m,
            weight: Some(eta),
            ..self.clone()
        }
    }
}

struct Coefficients {
    a: Vec<f64>,
    b: Vec<f64>,
}

fn sample(profile: &HeteroclinicProfile, xs: &[f64]) -> Coefficients {
    let states: Vec<_> = xs.iter().map(|&x| profile.state_at(x)).collect();
    Coefficients {
        a: states.iter().map(|s| s.a0()).collect(),
        b: states.iter().map(|s| s.b0()).collect(),
    }
}

fn check_spacing(p: &Params, spec: &GridSpec) -> Result<()> {
    let limit = spacing_limit(p);
    if !(spec.h > 0.0) || spec.h > limit || !(spec.x_max > spec.x_min) {
        return Err(Error::GridTooCoarse {
            spacing: spec.h,
            limit,
        });
    }
    Ok(())
}

/// Ghost values `u_{-1}, u_{-2}` as combinations of `(u_0, u_1)` for the
/// decaying solutions of `u'''' = p u` with `p < 0`, stepping away from the grid.
fn quartic_ghosts(p: f64, h: f64) -> [[f64; 2]; 2] {
    let r = (-p).max(0.0).powf(0.25) / 2f64.sqrt();
    let phi1 = |t: f64| (r * t).exp() * (r * t).cos();
    let phi2 = |t: f64| (r * t).exp() * (r * t).sin();
    if r == 0.0 {
        return [[2.0, -1.0], [3.0, -2.0]];
    }
    // u(t) = u0 phi1(t) + c2 phi2(t) with c2 = (u1 - u0 phi1(h)) / phi2(h).
    let ghost = |t: f64| {
        let k = phi2(t) / phi2(h);
        [phi1(t) - k * phi1(h), k]
    };
    [ghost(-h), ghost(-2.0 * h)]
}

/// Ghost value `u_{-1}` for decaying solutions of `u'' = kappa^2 u`.
fn quadratic_ghost(kappa2: f64, h: f64) -> f64 {
    (-kappa2.max(0.0).sqrt() * h).exp()
}

struct Assembler {
    trip: Vec<(usize, usize, f64)>,
    comps: usize,
    n: usize,
}

impl Assembler {
    /// Adds `coef * u_j` of component `comp` to `row`, folding ghosts into boundary unknowns.
    fn add(&mut self, row: usize, comp: usize, j: isize, coef: f64, ghosts: &dyn Fn(isize) -> Vec<(usize, f64)>) {
        if j >= 0 && (j as usize) < self.n {
            self.trip.push((row, j as usize * self.comps + comp, coef));
        } else {
            for (node, w) in ghosts(j) {
                self.trip.push((row, node * self.comps + comp, coef * w));
            }
        }
    }
}

/// Assembles the coupled `(A, C)` operator.
pub fn assemble_mg(profile: &HeteroclinicProfile, spec: &GridSpec) -> Result<GridOperator> {
    let p = profile.params;
    check_spacing(&p, spec)?;
    let xs = spec.abscissae();
    let n = xs.len();
    let h = xs[1] - xs[0];
    let co = sample(profile, &xs);
    let g = p.g;
    let eps2 = p.epsilon * p.epsilon;
    let pa: Vec<f64> = (0..n).map(|i| 1.0 - 3.0 * co.a[i].powi(2) - g * co.b[i].powi(2)).collect();
    let qc: Vec<f64> = (0..n).map(|i| 1.0 - g * co.a[i].powi(2) - 3.0 * co.b[i].powi(2)).collect();
    let cross: Vec<f64> = (0..n).map(|i| -2.0 * g * co.a[i] * co.b[i]).collect();
    let closure = spec.closure;
    let pa_ends = (pa[0], pa[n - 1]);
    let a_ghosts = move |j: isize| -> Vec<(usize, f64)> {
        if closure == Closure::Clamped {
            return Vec::new();
        }
        let (edge, inward, dist, pe) = if j < 0 {
            (0usize, 1usize, (-j) as usize, pa_ends.0)
        } else {
            (n - 1, n - 2, j as usize - (n - 1), pa_ends.1)
        };
        let w = quartic_ghosts(pe, h)[dist - 1];
        vec![(edge, w[0]), (inward, w[1])]
    };
    let qc_ends = (qc[0], qc[n - 1]);
    let c_ghosts = move |j: isize| -> Vec<(usize, f64)> {
        if closure == Closure::Clamped {
            return Vec::new();
        }
        let (edge, q) = if j < 0 { (0usize, qc_ends.0) } else { (n - 1, qc_ends.1) };
        vec![(edge, quadratic_ghost(-q * eps2, h))]
    };
    let mut asm = Assembler {
        trip: Vec::with_capacity(n * 12),
        comps: 2,
        n,
    };
    let h4 = h.powi(4);
    let h2 = h * h;
    for i in 0..n {
        let ii = i as isize;
        let ra = 2 * i;
        let rc = 2 * i + 1;
        for (off, w) in [(-2isize, 1.0), (-1, -4.0), (0, 6.0), (1, -4.0), (2, 1.0)] {
            asm.add(ra, 0, ii + off, -w / h4, &a_ghosts);
        }
        asm.trip.push((ra, ra, pa[i]));
        asm.trip.push((ra, rc, cross[i]));
        for (off, w) in [(-1isize, 1.0), (0, -2.0), (1, 1.0)] {
            asm.add(rc, 1, ii + off, w / (h2 * eps2), &c_ghosts);
        }
        asm.trip.push((rc, rc, qc[i]));
        asm.trip.push((rc, ra, cross[i]));
    }
    Ok(GridOperator {
        kind: OperatorKind::M,
        xs,
        h,
        closure,
        matrix: BandMatrix::from_triplets(2 * n, &asm.trip),
        weight: None,
    })
}

/// Assembles the `D` operator.
pub fn assemble_lg(profile: &HeteroclinicProfile, spec: &GridSpec) -> Result<GridOperator> {
    let p = profile.params;
    check_spacing(&p, spec)?;
    let xs = spec.abscissae();
    let n = xs.len();
    let h = xs[1] - xs[0];
    let co = sample(profile, &xs);
    let eps2 = p.epsilon * p.epsilon;
    let v: Vec<f64> = (0..n).map(|i| lg_potential(co.a[i], co.b[i], &p)).collect();
    let closure = spec.closure;
    let ends = (v[0], v[n - 1]);
    let ghosts = move |j: isize| -> Vec<(usize, f64)> {
        if closure == Closure::Clamped {
            return Vec::new();
        }
        let (edge, q) = if j < 0 { (0usize, ends.0) } else { (n - 1, ends.1) };
        vec![(edge, quadratic_ghost(-q * eps2, h))]
    };
    let mut asm = Assembler {
        trip: Vec::with_capacity(n * 4),
        comps: 1,
        n,
    };
    for i in 0..n {
        for (off, w) in [(-1isize, 1.0), (0, -2.0), (1, 1.0)] {
            asm.add(i, 0, i as isize + off, w / (h * h * eps2), &ghosts);
        }
        asm.trip.push((i, i, v[i]));
    }
    Ok(GridOperator {
        kind: OperatorKind::L,
        xs,
        h,
        closure,
        matrix: BandMatrix::from_triplets(n, &asm.trip),
        weight: None,
    })
}

/// Potential `1 - g A^2 - B^2` of the `D` operator.
pub fn lg_potential(a: f64, b: f64, p: &Params) -> f64 {
    1.0 - p.g * a * a - b * b
}

/// The profile derivative `(A*', B*')` interleaved on the operator grid.
pub fn profile_derivative(op: &GridOperator, profile: &HeteroclinicProfile) -> Vec<f64> {
    op.xs
        .iter()
        .flat_map(|&x| {
            let s = profile.state_at(x);
            [s.a1(), s.b1()]
        })
        .collect()
}

/// `B*` on the operator grid.
pub fn profile_b(op: &GridOperator, profile: &HeteroclinicProfile) -> Vec<f64> {
    op.xs.iter().map(|&x| profile.state_at(x).b0()).collect()
}

fn sup(v: impl IntoIterator<Item = f64>) -> f64 {
    v.into_iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// `sup |op u|` over interior rows divided by `sup |u|`.
pub fn interior_relative_residual(op: &GridOperator, u: &[f64]) -> f64 {
    let r = op.apply(u);
    let num = sup((0..r.len()).filter(|&k| op.is_interior_row(k)).map(|k| r[k]));
    num / sup(u.iter().copied())
}

/// Relative residual of the profile derivative under `M`, or of `B*` under `L`.
pub fn kernel_residual(op: &GridOperator, profile: &HeteroclinicProfile) -> f64 {
    let u = match op.kind {
        OperatorKind::M => profile_derivative(op, profile),
        OperatorKind::L => profile_b(op, profile),
    };
    interior_relative_residual(op, &u)
}

/// Kernel diagnostics of an assembled operator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelReport {
    /// The three smallest singular values, ascending.
    pub smallest: Vec<f64>,
    /// Ratio of the second to the first singular value.
    pub separation: f64,
    /// Interior relative residual of the profile derivative.
    pub kernel_residual: f64,
    /// Angle in radians between the kernel candidate and `(A*', B*')`.
    pub kernel_angle: f64,
    /// `|int A* B* (B* u + A* v) dx|` for the candidate normalised in `L^2`.
    pub orthogonality_defect: f64,
}

/// Smallest singular values of `M` and comparison of its near-kernel with `(A*', B*')`.
pub fn kernel_diagnostics(op: &GridOperator, profile: &HeteroclinicProfile) -> Result<KernelReport> {
    if op.kind != OperatorKind::M {
        return Err(Error::Domain("kernel diagnostics expect the coupled operator".into()));
    }
    let sv = op.matrix.smallest_singular_values(3, 400)?;
    let w = profile_derivative(op, profile);
    let mut v = sv.vectors[0].clone();
    let dot: f64 = v.iter().zip(&w).map(|(a, b)| a * b).sum();
    let nw = w.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let cos = (dot.abs() / (nw * nv)).min(1.0);
    if dot < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
    let h = op.h;
    let l2 = (v.iter().map(|x| x * x).sum::<f64>() * h).sqrt();
    let n = op.xs.len();
    let integrand: Vec<f64> = (0..n)
        .map(|i| {
            let s = profile.state_at(op.xs[i]);
            let (a, b) = (s.a0(), s.b0());
            a * b * (b * v[2 * i] + a * v[2 * i + 1]) / l2
        })
        .collect();
    let integral = h * (integrand.iter().sum::<f64>() - 0.5 * (integrand[0] + integrand[n - 1]));
    Ok(KernelReport {
        separation: sv.values[1] / sv.values[0],
        smallest: sv.values,
        kernel_residual: kernel_residual(op, profile),
        kernel_angle: cos.acos(),
        orthogonality_defect: integral.abs(),
    })
}

/// Solves `L u = f` through the variation-of-constants representation
/// `u = eps^2 B*(x) int_x^inf F(s) / B*(s)^2 ds`, with
/// `F(s) = int_s^inf f B*` for `s >= 0` and `F(s) = -int_-inf^s f B*` for `s <= 0`.
///
/// `xs` must be uniform and contain `0`; `f` is taken to vanish outside the grid.
/// The result is unique up to adding multiples of `B*`.
pub fn lg_pseudo_inverse(xs: &[f64], f: &[f64], profile: &HeteroclinicProfile) -> Result<Vec<f64>> {
    let n = xs.len();
    if n < 5 || f.len() != n {
        return Err(Error::Domain("pseudo-inverse needs at least five matching samples".into()));
    }
    let h = (xs[n - 1] - xs[0]) / (n - 1) as f64;
    if xs.windows(2).any(|w| ((w[1] - w[0]) - h).abs() > 1e-9 * h.max(1.0)) {
        return Err(Error::Domain("pseudo-inverse needs a uniform grid".into()));
    }
    let k0 = xs
        .iter()
        .position(|&x| x.abs() <= 1e-12 * h)
        .ok_or_else(|| Error::Domain("pseudo-inverse grid must contain x = 0".into()))?;
    let eps2 = profile.params.epsilon.powi(2);
    let b: Vec<f64> = xs.iter().map(|&x| profile.state_at(x).b0()).collect();
    let fb: Vec<f64> = f.iter().zip(&b).map(|(u, v)| u * v).collect();
    let mut right = vec![0.0; n];
    cumulative_from_right(&fb, h, &mut right);
    let total = right[0];
    let scale = h * fb.iter().map(|v| v.abs()).sum::<f64>();
    let tolerance = 1e-6 * scale.max(f64::MIN_POSITIVE);
    if total.abs() > tolerance {
        return Err(Error::Solvability {
            defect: total,
            tolerance,
        });
    }
    let big_f: Vec<f64> = (0..n)
        .map(|i| if i >= k0 { right[i] } else { right[i] - total })
        .collect();
    let integrand: Vec<f64> = big_f.iter().zip(&b).map(|(u, v)| u / (v * v)).collect();
    let mut g = vec![0.0; n];
    cumulative_from_right(&integrand, h, &mut g);
    Ok((0..n).map(|i| eps2 * b[i] * g[i]).collect())
}

/// Side of the far field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FarSide {
    Minus,
    Plus,
}

/// Upper edge of the essential spectrum of the constant-coefficient far-field operator.
///
/// For `M` both sides consist of a fourth-order block and a second-order
/// block whose spectra are `(-inf, -2]` and `(-inf, -(g-1)]`, so the edge is
/// `-min(2, g-1)`. For `L` the edge is `-(g-1)` on the left and `0` on the right.
pub fn asymptotic_spectrum(g: f64, side: FarSide, kind: OperatorKind) -> f64 {
    match (kind, side) {
        (OperatorKind::M, _) => -(2.0f64).min(g - 1.0),
        (OperatorKind::L, FarSide::Minus) => -(g - 1.0),
        (OperatorKind::L, FarSide::Plus) => 0.0,
    }
}

/// Spectral summary of a profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralReport {
    pub grid_spacing: f64,
    pub m_kernel: KernelReport,
    /// Smallest singular values of `L` conjugated by `exp(eps delta |x| / 2)`.
    pub l_weighted_smallest: Vec<f64>,
    pub l_kernel_residual: f64,
    pub edges: SpectrumEdges,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumEdges {
    pub m_minus: f64,
    pub m_plus: f64,
    pub l_minus: f64,
    pub l_plus: f64,
}

/// Kernel and spectral diagnostics of both operators at spacing `h`.
pub fn spectral_report(profile: &HeteroclinicProfile, h: f64) -> Result<SpectralReport> {
    let spec = GridSpec::over(profile, h);
    let p = profile.params;
    let (m, l) = rayon::join(|| assemble_mg(profile, &spec), || assemble_lg(profile, &spec));
    let (m, l) = (m?, l?);
    let m_kernel = kernel_diagnostics(&m, profile)?;
    // Members of the weighted space decay at both ends, so the weighted
    // operator is closed with zero ghosts; the decaying-mode closure would
    // admit the bounded function B* at the right end.
    let eta = 0.5 * p.epsilon * p.delta;
    let clamped = GridSpec {
        closure: Closure::Clamped,
        ..spec
    };
    let lw = assemble_lg(profile, &clamped)?
        .weighted(eta)
        .matrix
        .smallest_singular_values(3, 400)?;
    Ok(SpectralReport {
        grid_spacing: m.h,
        m_kernel,
        l_weighted_smallest: lw.values,
        l_kernel_residual: kernel_residual(&l, profile),
        edges: SpectrumEdges {
            m_minus: asymptotic_spectrum(p.g, FarSide::Minus, OperatorKind::M),
            m_plus: asymptotic_spectrum(p.g, FarSide::Plus, OperatorKind::M),
            l_minus: asymptotic_spectrum(p.g, FarSide::Minus, OperatorKind::L),
            l_plus: asymptotic_spectrum(p.g, FarSide::Plus, OperatorKind::L),
        },
    })
}
