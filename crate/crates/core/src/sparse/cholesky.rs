//! Band Cholesky factorization, the exact log-determinant oracle.
//!
//! The factor is stored row-wise in a `n x (b + 1)` band where `b` is the
//! matrix bandwidth; a dense matrix is simply the case `b = n - 1`. Lattice
//! precision matrices in row-major order have `b` equal to the lattice width,
//! which keeps the exact path usable far past dense sizes.

use super::SparseSymMatrix;
use crate::error::{Error, Result};

/// Default cap on band storage, in `f64` entries (2 GiB).
pub const DEFAULT_BAND_LIMIT: usize = 1 << 28;

#[derive(Debug, Clone)]
pub struct BandCholesky {
    dim: usize,
    bandwidth: usize,
    /// Row `i` holds `L[i][i - b ..= i]`; entries left of column 0 stay zero.
    band: Vec<f64>,
}

impl BandCholesky {
    pub fn factor(a: &SparseSymMatrix) -> Result<Self> {
        Self::factor_with_limit(a, DEFAULT_BAND_LIMIT)
    }

    pub fn factor_with_limit(a: &SparseSymMatrix, limit: usize) -> Result<Self> {
        let n = a.dim();
        let b = a.bandwidth();
        let width = b + 1;
        let required = n.saturating_mul(width);
        if required > limit {
            return Err(Error::TooLarge { required, limit });
        }

        let mut band = vec![0.0; required];
        for i in 0..n {
            for (j, v) in a.row(i) {
                if j <= i {
                    band[i * width + (j + b - i)] = v;
                }
            }
        }

        for i in 0..n {
            let lo_i = i.saturating_sub(b);
            for j in lo_i..=i {
                let lo = lo_i.max(j.saturating_sub(b));
                let row_i = &band[i * width + (lo + b - i)..i * width + (j + b - i)];
                let row_j = &band[j * width + (lo + b - j)..j * width + b];
                let s: f64 = band[i * width + (j + b - i)]
                    - row_i.iter().zip(row_j).map(|(x, y)| x * y).sum::<f64>();
                if i == j {
                    if !(s > 0.0) {
                        return Err(Error::NotPositiveDefinite { pivot: i, value: s });
                    }
                    band[i * width + b] = s.sqrt();
                } else {
                    band[i * width + (j + b - i)] = s / band[j * width + b];
                }
            }
        }
        Ok(BandCholesky { dim: n, bandwidth: b, band })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn l(&self, i: usize, j: usize) -> f64 {
        self.band[i * (self.bandwidth + 1) + (j + self.bandwidth - i)]
    }

    /// `log det A = 2 sum log L_ii`.
    pub fn logdet(&self) -> f64 {
        2.0 * (0..self.dim).map(|i| self.l(i, i).ln()).sum::<f64>()
    }

    /// Solves `L y = rhs`.
    pub fn solve_lower(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        self.check_len(rhs)?;
        let b = self.bandwidth;
        let mut y = rhs.to_vec();
        for i in 0..self.dim {
            let lo = i.saturating_sub(b);
            let s: f64 = (lo..i).map(|j| self.l(i, j) * y[j]).sum();
            y[i] = (y[i] - s) / self.l(i, i);
        }
        Ok(y)
    }

    /// Solves `L^T x = rhs`.
    pub fn solve_upper(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        self.check_len(rhs)?;
        let b = self.bandwidth;
        let mut x = rhs.to_vec();
        for i in (0..self.dim).rev() {
            x[i] /= self.l(i, i);
            let xi = x[i];
            for j in i.saturating_sub(b)..i {
                x[j] -= self.l(i, j) * xi;
            }
        }
        Ok(x)
    }

    /// Solves `A x = rhs`.
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        self.solve_upper(&self.solve_lower(rhs)?)
    }

    fn check_len(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: v.len() });
        }
        Ok(())
    }
}

pub fn exact_logdet(a: &SparseSymMatrix) -> Result<f64> {
    exact_logdet_with_limit(a, DEFAULT_BAND_LIMIT)
}

pub fn exact_logdet_with_limit(a: &SparseSymMatrix, limit: usize) -> Result<f64> {
    Ok(BandCholesky::factor_with_limit(a, limit)?.logdet())
}
