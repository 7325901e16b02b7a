//! Compressed sparse row storage for symmetric real matrices.
//!
//! Both triangles are stored, every diagonal entry is present (possibly an
//! explicit zero) and column indices are sorted within each row. Everything
//! downstream touches the matrix only through [`LinearOperator`].

mod cholesky;
mod market;
mod synth;

pub use cholesky::{exact_logdet, exact_logdet_with_limit, BandCholesky, DEFAULT_BAND_LIMIT};
pub use market::{load_matrix_market, read_matrix_market, write_matrix_market};
pub use synth::{synth_wishart_identity, SYNTH_NORM_ITERS, SYNTH_NORM_TOL};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// A symmetric linear map applied matrix-free.
pub trait LinearOperator: Sync {
    fn dim(&self) -> usize;

    /// `y <- Op x`. Both slices have length `dim()`.
    fn apply(&self, x: &[f64], y: &mut [f64]);
}

#[derive(Debug, Clone, PartialEq)]
pub struct SparseSymMatrix {
    dim: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseSymMatrix {
    pub fn identity(n: usize) -> Self {
        Self::from_diagonal(&vec![1.0; n])
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        SparseSymMatrix {
            dim: n,
            row_offsets: (0..=n).collect(),
            col_indices: (0..n).collect(),
            values: diag.to_vec(),
        }
    }

    /// Builds from entries given for one triangle (either one, or mixed); each
    /// off-diagonal entry is mirrored. Duplicates are summed.
    pub fn from_lower_triplets<I>(n: usize, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, f64)>,
    {
        let mut full = Vec::new();
        for (i, j, v) in entries {
            check_index(n, i, j)?;
            full.push((i, j, v));
            if i != j {
                full.push((j, i, v));
            }
        }
        Ok(Self::assemble(n, full))
    }

    /// Builds from entries covering both triangles and rejects matrices whose
    /// assembled values are not exactly symmetric.
    pub fn from_full_triplets<I>(n: usize, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, f64)>,
    {
        let mut full = Vec::new();
        for (i, j, v) in entries {
            check_index(n, i, j)?;
            full.push((i, j, v));
        }
        let m = Self::assemble(n, full);
        m.check_symmetric()?;
        Ok(m)
    }

    /// Row-major dense input. Zeros off the diagonal are dropped.
    pub fn from_dense(n: usize, dense: &[f64]) -> Result<Self> {
        if dense.len() != n * n {
            return Err(Error::DimensionMismatch { expected: n * n, found: dense.len() });
        }
        let entries = (0..n).flat_map(|i| {
            (0..n).filter_map(move |j| {
                let v = dense[i * n + j];
                (v != 0.0 || i == j).then_some((i, j, v))
            })
        });
        Self::from_full_triplets(n, entries)
    }

    fn assemble(n: usize, mut entries: Vec<(usize, usize, f64)>) -> Self {
        entries.extend((0..n).map(|i| (i, i, 0.0)));
        entries.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));

        let mut row_offsets = vec![0usize; n + 1];
        let mut col_indices = Vec::with_capacity(entries.len());
        let mut values: Vec<f64> = Vec::with_capacity(entries.len());
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in entries {
            if last == Some((i, j)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_indices.push(j);
                values.push(v);
                row_offsets[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..n {
            row_offsets[i + 1] += row_offsets[i];
        }
        SparseSymMatrix { dim: n, row_offsets, col_indices, values }
    }

    fn check_symmetric(&self) -> Result<()> {
        for i in 0..self.dim {
            for (j, v) in self.row(i) {
                if self.get(j, i) != v {
                    return Err(Error::NotSymmetric { row: i, col: j });
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `(column, value)` pairs of row `i` in ascending column order.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_offsets[i]..self.row_offsets[i + 1];
        self.col_indices[span.clone()].iter().copied().zip(self.values[span].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let span = self.row_offsets[i]..self.row_offsets[i + 1];
        match self.col_indices[span.clone()].binary_search(&j) {
            Ok(pos) => self.values[span.start + pos],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim).map(|i| self.get(i, i)).collect()
    }

    /// Largest `|i - j|` over stored entries.
    pub fn bandwidth(&self) -> usize {
        (0..self.dim)
            .map(|i| {
                let span = self.row_offsets[i]..self.row_offsets[i + 1];
                // sorted columns: the extremes are first and last
                let first = self.col_indices[span.start];
                let last = self.col_indices[span.end - 1];
                (i - first.min(i)).max(last.saturating_sub(i))
            })
            .max()
            .unwrap_or(0)
    }

    /// Returns `s * A` (values scaled, pattern shared).
    pub fn scaled(&self, s: f64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= s);
        out
    }

    /// Returns `A + s I`.
    pub fn shifted(&self, s: f64) -> Self {
        let mut out = self.clone();
        for i in 0..self.dim {
            let span = out.row_offsets[i]..out.row_offsets[i + 1];
            let pos = out.col_indices[span.clone()].binary_search(&i).expect("diagonal is stored");
            out.values[span.start + pos] += s;
        }
        out
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let n = self.dim;
        let mut dense = vec![0.0; n * n];
        for i in 0..n {
            for (j, v) in self.row(i) {
                dense[i * n + j] = v;
            }
        }
        dense
    }

    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: x.len() });
        }
        let mut y = vec![0.0; self.dim];
        self.apply(x, &mut y);
        Ok(y)
    }

    /// Maximum upper Gershgorin endpoint, `max_i a_ii + sum_{j != i} |a_ij|`.
    pub fn gershgorin_upper(&self) -> f64 {
        (0..self.dim)
            .map(|i| {
                self.row(i)
                    .map(|(j, v)| if j == i { v } else { v.abs() })
                    .sum::<f64>()
            })
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Minimum lower Gershgorin endpoint.
    pub fn gershgorin_lower(&self) -> f64 {
        (0..self.dim)
            .map(|i| {
                self.row(i)
                    .map(|(j, v)| if j == i { v } else { -v.abs() })
                    .sum::<f64>()
            })
            .fold(f64::INFINITY, f64::min)
    }
}

fn check_index(n: usize, i: usize, j: usize) -> Result<()> {
    if i >= n || j >= n {
        return Err(Error::InvalidArgument(format!(
            "entry ({i}, {j}) out of bounds for dimension {n}"
        )));
    }
    Ok(())
}

impl LinearOperator for SparseSymMatrix {
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.dim);
        assert_eq!(y.len(), self.dim);
        for (i, yi) in y.iter_mut().enumerate() {
            let span = self.row_offsets[i]..self.row_offsets[i + 1];
            *yi = self.col_indices[span.clone()]
                .iter()
                .zip(&self.values[span])
                .map(|(&j, &v)| v * x[j])
                .sum();
        }
    }
}

/// `y = scale * (Op x) + shift * x`.
pub struct Affine<'a, Op: LinearOperator + ?Sized> {
    pub inner: &'a Op,
    pub scale: f64,
    pub shift: f64,
}

impl<'a, Op: LinearOperator + ?Sized> Affine<'a, Op> {
    pub fn new(inner: &'a Op, scale: f64, shift: f64) -> Self {
        Affine { inner, scale, shift }
    }
}

impl<Op: LinearOperator + ?Sized> LinearOperator for Affine<'_, Op> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.inner.apply(x, y);
        if self.shift == 0.0 {
            y.iter_mut().for_each(|v| *v *= self.scale);
        } else {
            for (v, xi) in y.iter_mut().zip(x) {
                *v = self.scale * *v + self.shift * xi;
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerIteration {
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
    /// `||A v - value v||` at the final unit iterate `v`. Some eigenvalue lies
    /// within this distance of `value`.
    pub residual: f64,
    /// The iterate collapsed to zero (zero matrix, or start vector in the null space).
    pub degenerate: bool,
}

/// Power iteration for the largest eigenvalue of a symmetric PSD operator.
///
/// Stops once successive Rayleigh quotients agree to `tol` relatively. The
/// start vector is a fixed-seed Gaussian draw so the result is reproducible.
pub fn spectral_norm_estimate<Op: LinearOperator + ?Sized>(
    op: &Op,
    max_iters: usize,
    tol: f64,
) -> Result<PowerIteration> {
    if max_iters == 0 {
        return Err(Error::InvalidArgument("max_iters must be at least 1".into()));
    }
    let n = op.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0f_90e7);
    let mut v: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
    let mut w = vec![0.0; n];
    normalize(&mut v);

    let mut previous = f64::NAN;
    let mut residual = f64::NAN;
    for iter in 1..=max_iters {
        op.apply(&v, &mut w);
        let rayleigh = dot(&v, &w);
        let norm = dot(&w, &w).sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Ok(PowerIteration {
                value: 0.0,
                iterations: iter,
                converged: false,
                residual: 0.0,
                degenerate: true,
            });
        }
        let converged = (rayleigh - previous).abs() < tol * rayleigh.abs();
        previous = rayleigh;
        residual = (norm * norm - rayleigh * rayleigh).max(0.0).sqrt();
        if converged {
            return Ok(PowerIteration { value: rayleigh, iterations: iter, converged, residual, degenerate: false });
        }
        w.iter_mut().for_each(|x| *x /= norm);
        std::mem::swap(&mut v, &mut w);
    }
    Ok(PowerIteration { value: previous, iterations: max_iters, converged: false, residual, degenerate: false })
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalize(v: &mut [f64]) {
    let norm = dot(v, v).sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
}
