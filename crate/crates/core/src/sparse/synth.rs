use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{spectral_norm_estimate, SparseSymMatrix};
use crate::error::{Error, Result};

pub const SYNTH_NORM_ITERS: usize = 100;
pub const SYNTH_NORM_TOL: f64 = 1e-10;

/// `G^T G / ||G^T G||_2 + I` for an `n x n` standard normal `G`.
///
/// The Gram matrix is divided by the power-iteration Rayleigh quotient plus
/// its residual norm, so the spectrum lies in `[1, 2]`. The result is stored with a dense pattern.
pub fn synth_wishart_identity(n: usize, seed: u64) -> Result<SparseSymMatrix> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("synthetic dimension must be at least 2, got {n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g: Vec<f64> = (0..n * n).map(|_| StandardNormal.sample(&mut rng)).collect();

    // accumulate rank-one updates row by row; upper triangle only
    let mut gram = vec![0.0; n * n];
    for row in g.chunks_exact(n) {
        for i in 0..n {
            let ri = row[i];
            let dst = &mut gram[i * n + i..(i + 1) * n];
            for (d, &rj) in dst.iter_mut().zip(&row[i..]) {
                *d += ri * rj;
            }
        }
    }
    for i in 0..n {
        for j in 0..i {
            gram[i * n + j] = gram[j * n + i];
        }
    }

    let gram = SparseSymMatrix::from_dense(n, &gram)?;
    let power = spectral_norm_estimate(&gram, SYNTH_NORM_ITERS, SYNTH_NORM_TOL)?;
    let norm = power.value + power.residual;
    Ok(gram.scaled(1.0 / norm).shifted(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::exact_logdet;

    #[test]
    fn deterministic_per_seed() {
        let a = synth_wishart_identity(100, 11).unwrap();
        let b = synth_wishart_identity(100, 11).unwrap();
        assert_eq!(a, b);
        let c = synth_wishart_identity(100, 12).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn logdet_within_eigenvalue_bounds() {
        let a = synth_wishart_identity(100, 3).unwrap();
        let ld = exact_logdet(&a).unwrap();
        assert!(ld > 0.0 && ld < 100.0 * 2f64.ln(), "{ld}");
    }

    #[test]
    fn spectrum_in_unit_band() {
        for (n, seed) in [(2, 0), (7, 1), (50, 3), (200, 9)] {
            let a = synth_wishart_identity(n, seed).unwrap();
            let eig = nalgebra::DMatrix::from_row_slice(n, n, &a.to_dense()).symmetric_eigenvalues();
            assert!(eig.min() >= 1.0 - 1e-12 && eig.max() <= 2.0 + 1e-12, "{} {}", eig.min(), eig.max());
        }
    }

    #[test]
    fn rejects_tiny_dimension() {
        assert!(synth_wishart_identity(1, 0).is_err());
    }
}
