//! Banded matrices with an LU factorisation using partial pivoting.

use crate::error::{Error, Result};

/// A square matrix with `kl` sub-diagonals and `ku` super-diagonals.
///
/// Storage keeps `kl` extra super-diagonals per row so that row exchanges
/// during factorisation fit in place.
#[derive(Debug, Clone, PartialEq)]
pub struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let width = 2 * kl + ku + 1;
        Self {
            n,
            kl,
            ku,
            width,
            data: vec![0.0; n * width],
        }
    }

    /// Builds a matrix from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut kl = 0;
        let mut ku = 0;
        for &(i, j, _) in triplets {
            if i > j {
                kl = kl.max(i - j);
            } else {
                ku = ku.max(j - i);
            }
        }
        let mut m = Self::zeros(n, kl, ku);
        for &(i, j, v) in triplets {
            m.add(i, j, v);
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidths(&self) -> (usize, usize) {
        (self.kl, self.ku)
    }

    fn slot(&self, i: usize, j: usize) -> Option<usize> {
        if i >= self.n || j >= self.n || j + self.kl < i || j > i + self.ku + self.kl {
            return None;
        }
        Some(i * self.width + (j + self.kl - i))
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.slot(i, j).map_or(0.0, |k| self.data[k])
    }

    /// Adds `v` to entry `(i, j)`; panics outside the declared band.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        assert!(
            j <= i + self.ku && i <= j + self.kl,
            "entry ({i}, {j}) outside the band"
        );
        let k = self.slot(i, j).expect("entry inside the band");
        self.data[k] += v;
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        assert!(
            j <= i + self.ku && i <= j + self.kl,
            "entry ({i}, {j}) outside the band"
        );
        let k = self.slot(i, j).expect("entry inside the band");
        self.data[k] = v;
    }

    fn row_range(&self, i: usize) -> (usize, usize) {
        (i.saturating_sub(self.kl), (i + self.ku).min(self.n - 1))
    }

    /// `y = A x`.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                let (lo, hi) = self.row_range(i);
                (lo..=hi).map(|j| self.get(i, j) * x[j]).sum()
            })
            .collect()
    }

    /// `y = A^T x`.
    pub fn mul_transpose_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for i in 0..self.n {
            let (lo, hi) = self.row_range(i);
            for (j, yj) in y.iter_mut().enumerate().take(hi + 1).skip(lo) {
                *yj += self.get(i, j) * x[i];
            }
        }
        y
    }

    /// Whether `A == A^T` entrywise.
    pub fn is_symmetric(&self) -> bool {
        (0..self.n).all(|i| {
            let (lo, hi) = self.row_range(i);
            (lo..=hi).all(|j| self.get(i, j) == self.get(j, i))
        })
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// LU factorisation with partial pivoting.
    pub fn factor(&self) -> Result<BandLu> {
        let mut a = self.clone();
        let n = a.n;
        let kl = a.kl;
        let reach = a.ku + a.kl;
        let mut piv = vec![0usize; n];
        let mut lmul = vec![0.0; n * kl.max(1)];
        let scale = a.max_abs().max(f64::MIN_POSITIVE);
        for k in 0..n {
            let last_row = (k + kl).min(n - 1);
            let mut p = k;
            let mut best = a.get(k, k).abs();
            for r in k + 1..=last_row {
                let v = a.get(r, k).abs();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            piv[k] = p;
            if best <= 1e-300 * scale || best == 0.0 {
                return Err(Error::Singular(k));
            }
            let last_col = (k + reach).min(n - 1);
            if p != k {
                for j in k..=last_col {
                    let (u, v) = (a.get(k, j), a.get(p, j));
                    a.put(k, j, v);
                    a.put(p, j, u);
                }
            }
            let pivot = a.get(k, k);
            for r in k + 1..=last_row {
                let f = a.get(r, k) / pivot;
                lmul[k * kl.max(1) + (r - k - 1)] = f;
                if f != 0.0 {
                    a.put(r, k, 0.0);
                    for j in k + 1..=last_col {
                        let u = a.get(k, j);
                        if u != 0.0 {
                            let v = a.get(r, j) - f * u;
                            a.put(r, j, v);
                        }
                    }
                }
            }
        }
        Ok(BandLu {
            u: a,
            piv,
            lmul,
            kl,
        })
    }

    fn put(&mut self, i: usize, j: usize, v: f64) {
        if let Some(k) = self.slot(i, j) {
            self.data[k] = v;
        } else {
            debug_assert!(v == 0.0, "fill outside storage at ({i}, {j})");
        }
    }
}

/// Factors of a [`BandMatrix`].
#[derive(Debug, Clone)]
pub struct BandLu {
    u: BandMatrix,
    piv: Vec<usize>,
    lmul: Vec<f64>,
    kl: usize,
}

impl BandLu {
    fn l(&self, k: usize, r: usize) -> f64 {
        self.lmul[k * self.kl.max(1) + r]
    }

    /// Solves `A x = b` in place.
    pub fn solve(&self, b: &mut [f64]) {
        let n = self.u.n;
        let reach = self.u.ku + self.u.kl;
        for k in 0..n {
            b.swap(k, self.piv[k]);
            let bk = b[k];
            for r in 0..self.kl.min(n - 1 - k) {
                b[k + 1 + r] -= self.l(k, r) * bk;
            }
        }
        for i in (0..n).rev() {
            let mut acc = b[i];
            for j in i + 1..=(i + reach).min(n - 1) {
                acc -= self.u.get(i, j) * b[j];
            }
            b[i] = acc / self.u.get(i, i);
        }
    }

    /// Solves `A^T x = b` in place.
    pub fn solve_transpose(&self, b: &mut [f64]) {
        let n = self.u.n;
        let reach = self.u.ku + self.u.kl;
        for i in 0..n {
            let mut acc = b[i];
            for j in i.saturating_sub(reach)..i {
                acc -= self.u.get(j, i) * b[j];
            }
            b[i] = acc / self.u.get(i, i);
        }
        for k in (0..n).rev() {
            let mut acc = 0.0;
            for r in 0..self.kl.min(n - 1 - k) {
                acc += self.l(k, r) * b[k + 1 + r];
            }
            b[k] -= acc;
            b.swap(k, self.piv[k]);
        }
    }

    pub fn dim(&self) -> usize {
        self.u.n
    }
}

/// Smallest singular values of a banded matrix with their right singular vectors.
#[derive(Debug, Clone)]
pub struct SingularTriplets {
    /// Ascending singular values.
    pub values: Vec<f64>,
    /// Unit right singular vectors, one per value.
    pub vectors: Vec<Vec<f64>>,
}

impl BandMatrix {
    /// The `k` smallest singular values by subspace inverse iteration on `A^T A`
    /// with Rayleigh-Ritz extraction, using `k + 2` iteration vectors.
    pub fn smallest_singular_values(&self, k: usize, iterations: usize) -> Result<SingularTriplets> {
        let n = self.n;
        let m = (k + 2).min(n);
        let lu = self.factor()?;
        let mut basis: Vec<Vec<f64>> = (0..m)
            .map(|c| {
                (0..n)
                    .map(|i| (((i + 1) * (c + 3)) as f64 * 0.618_033_988_75).fract() - 0.5)
                    .collect()
            })
            .collect();
        orthonormalize(&mut basis);
        let mut values = vec![0.0; m];
        let mut vectors = basis.clone();
        for _ in 0..iterations {
            for v in basis.iter_mut() {
                lu.solve_transpose(v);
                lu.solve(v);
            }
            orthonormalize(&mut basis);
            let images: Vec<Vec<f64>> = basis.iter().map(|v| self.mul_vec(v)).collect();
            let gram = nalgebra::DMatrix::from_fn(m, m, |i, j| dot(&images[i], &images[j]));
            let eig = nalgebra::SymmetricEigen::new(gram);
            let mut order: Vec<usize> = (0..m).collect();
            order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
            let new_values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i].max(0.0).sqrt()).collect();
            vectors = order
                .iter()
                .map(|&c| {
                    let mut v = vec![0.0; n];
                    for (r, b) in basis.iter().enumerate() {
                        let w = eig.eigenvectors[(r, c)];
                        v.iter_mut().zip(b).for_each(|(x, y)| *x += w * y);
                    }
                    v
                })
                .collect();
            let settled = new_values
                .iter()
                .zip(&values)
                .take(k)
                .all(|(a, b)| (a - b).abs() <= 1e-12 * a.abs().max(f64::MIN_POSITIVE));
            values = new_values;
            basis = vectors.clone();
            if settled {
                break;
            }
        }
        values.truncate(k);
        vectors.truncate(k);
        Ok(SingularTriplets { values, vectors })
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn orthonormalize(basis: &mut [Vec<f64>]) {
    for i in 0..basis.len() {
        for _ in 0..2 {
            for j in 0..i {
                let (head, tail) = basis.split_at_mut(i);
                let c = dot(&tail[0], &head[j]);
                tail[0].iter_mut().zip(&head[j]).for_each(|(x, y)| *x -= c * y);
            }
        }
        let nrm = dot(&basis[i], &basis[i]).sqrt();
        if nrm > 0.0 {
            basis[i].iter_mut().for_each(|x| *x /= nrm);
        }
    }
}
