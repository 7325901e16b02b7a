//! Gaussian Markov random fields on regular lattices.
//!
//! The precision is the 4-neighbour stencil `Q_ii = tau (kappa^2 + deg_i)`,
//! `Q_ij = -tau` for lattice neighbours. Log likelihoods take their log
//! determinants either from the band Cholesky oracle or from the entropic
//! estimator.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::logdet::{logdet_maxent, EstimatorConfig};
use crate::sparse::{dot, exact_logdet, Affine, BandCholesky, LinearOperator, SparseSymMatrix};

pub const CG_TOL: f64 = 1e-12;
pub const CG_MAX_ITERS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatticeSpec {
    pub rows: usize,
    pub cols: usize,
    pub kappa: f64,
    pub tau: f64,
    /// Variance of the non-spatial noise; zero disables it.
    pub nugget_variance: f64,
}

impl LatticeSpec {
    pub fn new(rows: usize, cols: usize, kappa: f64, tau: f64) -> Result<Self> {
        let spec = LatticeSpec { rows, cols, kappa, tau, nugget_variance: 0.0 };
        spec.check()?;
        Ok(spec)
    }

    pub fn with_nugget(self, nugget_variance: f64) -> Result<Self> {
        let spec = LatticeSpec { nugget_variance, ..self };
        spec.check()?;
        Ok(spec)
    }

    pub fn dim(&self) -> usize {
        self.rows * self.cols
    }

    pub fn check(&self) -> Result<()> {
        if self.rows == 0 || self.cols == 0 {
            return Err(Error::InvalidArgument(format!("empty lattice {}x{}", self.rows, self.cols)));
        }
        if !(self.kappa > 0.0 && self.kappa.is_finite()) {
            return Err(Error::InvalidArgument(format!("kappa must be positive, got {}", self.kappa)));
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::InvalidArgument(format!("tau must be positive, got {}", self.tau)));
        }
        if !(self.nugget_variance >= 0.0 && self.nugget_variance.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "nugget variance must be nonnegative, got {}",
                self.nugget_variance
            )));
        }
        Ok(())
    }
}

/// Precision matrix of the lattice, nodes numbered row-major.
pub fn build_precision(spec: &LatticeSpec) -> Result<SparseSymMatrix> {
    spec.check()?;
    let (rows, cols, tau) = (spec.rows, spec.cols, spec.tau);
    let kappa2 = spec.kappa * spec.kappa;
    let mut entries = Vec::with_capacity(3 * spec.dim());
    for r in 0..rows {
        for c in 0..cols {
            let i = r * cols + c;
            let mut degree = 0;
            if r > 0 {
                entries.push((i, i - cols, -tau));
                degree += 1;
            }
            if c > 0 {
                entries.push((i, i - 1, -tau));
                degree += 1;
            }
            degree += usize::from(r + 1 < rows) + usize::from(c + 1 < cols);
            entries.push((i, i, tau * (kappa2 + degree as f64)));
        }
    }
    SparseSymMatrix::from_lower_triplets(spec.dim(), entries)
}

/// Source of the log determinants in a likelihood evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LogDetMethod {
    /// Band Cholesky factorization.
    Exact,
    Entropic(EstimatorConfig),
}

impl LogDetMethod {
    pub fn logdet(&self, q: &SparseSymMatrix) -> Result<f64> {
        match self {
            LogDetMethod::Exact => exact_logdet(q),
            LogDetMethod::Entropic(cfg) => Ok(logdet_maxent(q, cfg)?.estimate),
        }
    }
}

fn check_dims(q: &SparseSymMatrix, x: &[f64]) -> Result<()> {
    if q.dim() != x.len() {
        return Err(Error::DimensionMismatch { expected: q.dim(), found: x.len() });
    }
    Ok(())
}

/// `1/2 log det Q - 1/2 x^T Q x - n/2 log(2 pi)`.
pub fn log_likelihood(q: &SparseSymMatrix, x: &[f64], method: &LogDetMethod) -> Result<f64> {
    check_dims(q, x)?;
    let logdet = method.logdet(q)?;
    let quad = dot(x, &q.matvec(x)?);
    Ok(0.5 * logdet - 0.5 * quad - 0.5 * x.len() as f64 * (2.0 * PI).ln())
}

/// Log likelihood of `x` under covariance `Q^{-1} + sigma^2 I`.
///
/// `log det(Q^{-1} + sigma^2 I) = n log sigma^2 + log det(Q + sigma^{-2} I) - log det Q`,
/// and the quadratic form is `x^T y` with `(I + sigma^2 Q) y = Q x`.
pub fn log_likelihood_nugget(
    q: &SparseSymMatrix,
    x: &[f64],
    nugget_variance: f64,
    method: &LogDetMethod,
) -> Result<f64> {
    check_dims(q, x)?;
    if !(nugget_variance > 0.0 && nugget_variance.is_finite()) {
        return Err(Error::InvalidArgument(format!("nugget variance must be positive, got {nugget_variance}")));
    }
    let n = x.len() as f64;
    let logdet = nugget_logdet(q, nugget_variance, method)?;
    let rhs = q.matvec(x)?;
    let system = Affine::new(q, nugget_variance, 1.0);
    let y = conjugate_gradient(&system, &rhs, CG_TOL, CG_MAX_ITERS)?.x;
    let quad = dot(x, &y);
    Ok(-0.5 * logdet - 0.5 * quad - 0.5 * n * (2.0 * PI).ln())
}

/// `log det(Q^{-1} + sigma^2 I)` from two sparse log determinants.
pub fn nugget_logdet(q: &SparseSymMatrix, nugget_variance: f64, method: &LogDetMethod) -> Result<f64> {
    let n = q.dim() as f64;
    let shifted = q.shifted(1.0 / nugget_variance);
    Ok(n * nugget_variance.ln() + method.logdet(&shifted)? - method.logdet(q)?)
}

/// `x = L^{-T} z` with `Q = L L^T` and `z` standard normal, so `Cov(x) = Q^{-1}`.
pub fn sample_gmrf(q: &SparseSymMatrix, seed: u64) -> Result<Vec<f64>> {
    let factor = BandCholesky::factor(q)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let z: Vec<f64> = (0..q.dim()).map(|_| StandardNormal.sample(&mut rng)).collect();
    factor.solve_upper(&z)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CgSolution {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// `||b - A x|| / ||b||` from the recurrence.
    pub residual: f64,
}

/// Conjugate gradients for a symmetric positive definite operator, from a
/// zero start, until the relative residual drops below `tol`.
pub fn conjugate_gradient<Op: LinearOperator + ?Sized>(
    op: &Op,
    b: &[f64],
    tol: f64,
    max_iters: usize,
) -> Result<CgSolution> {
    if op.dim() != b.len() {
        return Err(Error::DimensionMismatch { expected: op.dim(), found: b.len() });
    }
    let n = b.len();
    let b_norm = dot(b, b).sqrt();
    let mut x = vec![0.0; n];
    if b_norm == 0.0 {
        return Ok(CgSolution { x, iterations: 0, residual: 0.0 });
    }
    let mut r = b.to_vec();
    let mut p = r.clone();
    let mut ap = vec![0.0; n];
    let mut rr = dot(&r, &r);
    for iteration in 1..=max_iters {
        op.apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::SolveDiverged { iterations: iteration, residual: rr.sqrt() / b_norm });
        }
        let step = rr / pap;
        for i in 0..n {
            x[i] += step * p[i];
            r[i] -= step * ap[i];
        }
        let next = dot(&r, &r);
        let residual = next.sqrt() / b_norm;
        if residual < tol {
            return Ok(CgSolution { x, iterations: iteration, residual });
        }
        let beta = next / rr;
        rr = next;
        for (pi, ri) in p.iter_mut().zip(&r) {
            *pi = ri + beta * *pi;
        }
    }
    Err(Error::SolveDiverged { iterations: max_iters, residual: rr.sqrt() / b_norm })
}

#[cfg(test)]
mod tests {
    use nalgebra::{DMatrix, DVector};

    use super::*;
    use crate::probe::ProbeKind;

    fn dense(q: &SparseSymMatrix) -> DMatrix<f64> {
        DMatrix::from_row_slice(q.dim(), q.dim(), &q.to_dense())
    }

    #[test]
    fn precision_examples() {
        let one = build_precision(&LatticeSpec::new(1, 1, 1.0, 1.0).unwrap()).unwrap();
        assert_eq!(one.to_dense(), vec![1.0]);

        let q = build_precision(&LatticeSpec::new(2, 2, 0.1, 1.0).unwrap()).unwrap();
        assert!(q.diagonal().iter().all(|&d| (d - 2.01).abs() < 1e-15));
        assert_eq!(q.nnz(), 4 + 8);
        for (i, j) in [(0, 1), (0, 2), (1, 3), (2, 3)] {
            assert_eq!(q.get(i, j), -1.0);
            assert_eq!(q.get(j, i), -1.0);
        }
        assert_eq!(q.get(0, 3), 0.0);

        let q = build_precision(&LatticeSpec::new(3, 5, 1.0, 2.0).unwrap()).unwrap();
        assert_eq!(q.get(7, 7), 2.0 * 5.0);
        assert_eq!(q.get(0, 0), 2.0 * 3.0);
        assert_eq!(q.bandwidth(), 5);
    }

    #[test]
    fn smallest_eigenvalue_respects_margin() {
        for (rows, cols, kappa, tau) in [(4, 6, 0.1, 1.0), (5, 5, 0.7, 2.5), (1, 9, 0.3, 0.2)] {
            let spec = LatticeSpec::new(rows, cols, kappa, tau).unwrap();
            let q = build_precision(&spec).unwrap();
            let min = dense(&q).symmetric_eigenvalues().min();
            assert!(min >= tau * kappa * kappa - 1e-12, "{min}");
            assert!(q.gershgorin_lower() >= tau * kappa * kappa - 1e-12);
        }
    }

    #[test]
    fn invalid_specs() {
        assert!(LatticeSpec::new(0, 3, 0.1, 1.0).is_err());
        assert!(LatticeSpec::new(3, 3, 0.0, 1.0).is_err());
        assert!(LatticeSpec::new(3, 3, 0.1, -1.0).is_err());
        assert!(LatticeSpec::new(3, 3, 0.1, 1.0).unwrap().with_nugget(-0.5).is_err());
    }

    #[test]
    fn scalar_likelihoods() {
        let (q, v) = (2.5, 0.7);
        let m = SparseSymMatrix::from_diagonal(&[q]);
        let ll = log_likelihood(&m, &[v], &LogDetMethod::Exact).unwrap();
        let want = 0.5 * q.ln() - 0.5 * q * v * v - 0.5 * (2.0 * PI).ln();
        assert!((ll - want).abs() < 1e-14);

        let s2 = 0.3;
        let ld = nugget_logdet(&m, s2, &LogDetMethod::Exact).unwrap();
        assert!((ld - (1.0 / q + s2).ln()).abs() < 1e-14);
        let ll = log_likelihood_nugget(&m, &[v], s2, &LogDetMethod::Exact).unwrap();
        let var = 1.0 / q + s2;
        let want = -0.5 * var.ln() - 0.5 * v * v / var - 0.5 * (2.0 * PI).ln();
        assert!((ll - want).abs() < 1e-12);
    }

    #[test]
    fn zero_field_leaves_only_the_determinant() {
        let q = build_precision(&LatticeSpec::new(4, 4, 0.5, 1.0).unwrap()).unwrap();
        let ll = log_likelihood(&q, &[0.0; 16], &LogDetMethod::Exact).unwrap();
        let want = 0.5 * exact_logdet(&q).unwrap() - 8.0 * (2.0 * PI).ln();
        assert_eq!(ll, want);
        assert!(matches!(
            log_likelihood(&q, &[0.0; 3], &LogDetMethod::Exact),
            Err(Error::DimensionMismatch { expected: 16, found: 3 })
        ));
    }

    #[test]
    fn vanishing_nugget_recovers_plain_likelihood() {
        let q = build_precision(&LatticeSpec::new(8, 8, 0.3, 1.0).unwrap()).unwrap();
        let x = sample_gmrf(&q, 4).unwrap();
        let plain = log_likelihood(&q, &x, &LogDetMethod::Exact).unwrap();
        let mut prev = f64::INFINITY;
        for s2 in [1e-2, 1e-4, 1e-6] {
            let ll = log_likelihood_nugget(&q, &x, s2, &LogDetMethod::Exact).unwrap();
            let gap = (ll - plain).abs();
            assert!(gap < prev);
            prev = gap;
        }
        assert!(prev < 1e-3 * plain.abs(), "{prev}");
    }

    #[test]
    fn nugget_matches_dense_construction() {
        let q = build_precision(&LatticeSpec::new(32, 32, 0.2, 1.5).unwrap()).unwrap();
        let n = q.dim();
        let x = sample_gmrf(&q, 1).unwrap();
        for s2 in [0.05, 0.5] {
            let cov = dense(&q).try_inverse().unwrap() + DMatrix::identity(n, n) * s2;
            let chol = cov.clone().cholesky().unwrap();
            let logdet: f64 = 2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
            let xv = DVector::from_column_slice(&x);
            let quad = xv.dot(&chol.solve(&xv));
            let want = -0.5 * logdet - 0.5 * quad - 0.5 * n as f64 * (2.0 * PI).ln();

            let ld = nugget_logdet(&q, s2, &LogDetMethod::Exact).unwrap();
            assert!((ld - logdet).abs() < 1e-8 * logdet.abs().max(1.0), "{ld} vs {logdet}");
            let ll = log_likelihood_nugget(&q, &x, s2, &LogDetMethod::Exact).unwrap();
            assert!((ll - want).abs() < 1e-6 * want.abs(), "{ll} vs {want}");
        }
    }

    #[test]
    fn samples_are_deterministic() {
        let q = build_precision(&LatticeSpec::new(5, 7, 0.1, 1.0).unwrap()).unwrap();
        assert_eq!(sample_gmrf(&q, 9).unwrap(), sample_gmrf(&q, 9).unwrap());
        assert_ne!(sample_gmrf(&q, 9).unwrap(), sample_gmrf(&q, 10).unwrap());
    }

    #[test]
    fn chain_sample_covariance() {
        let q = build_precision(&LatticeSpec::new(1, 3, 0.8, 1.0).unwrap()).unwrap();
        let inv = dense(&q).try_inverse().unwrap();
        let draws = 10_000;
        let mut cov = [[0.0; 3]; 3];
        for seed in 0..draws {
            let x = sample_gmrf(&q, seed).unwrap();
            for i in 0..3 {
                for j in 0..3 {
                    cov[i][j] += x[i] * x[j] / draws as f64;
                }
            }
        }
        for i in 0..3 {
            for j in 0..3 {
                let want = inv[(i, j)];
                assert!((cov[i][j] - want).abs() < 0.05 * want.abs(), "({i},{j}) {} vs {want}", cov[i][j]);
            }
        }
    }

    #[test]
    fn identity_precision_gives_standard_normals() {
        let x = sample_gmrf(&SparseSymMatrix::identity(20_000), 3).unwrap();
        let n = x.len() as f64;
        let mean = x.iter().sum::<f64>() / n;
        let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        // standard error of the sample variance is sqrt(2 / n)
        assert!((var - 1.0).abs() < 4.0 * (2.0 / n).sqrt(), "{var}");
    }

    #[test]
    fn entropic_likelihood_tracks_exact() {
        let q = build_precision(&LatticeSpec::new(16, 16, 0.1, 1.0).unwrap()).unwrap();
        let x = sample_gmrf(&q, 0).unwrap();
        let exact = log_likelihood(&q, &x, &LogDetMethod::Exact).unwrap();
        let cfg = EstimatorConfig::new(10, 30, ProbeKind::Rademacher, 0);
        let approx = log_likelihood(&q, &x, &LogDetMethod::Entropic(cfg)).unwrap();
        assert!((approx - exact).abs() < 5e-3 * exact.abs(), "{approx} vs {exact}");
    }

    #[test]
    fn conjugate_gradient_solves_and_reports_failure() {
        let q = build_precision(&LatticeSpec::new(6, 6, 0.5, 1.0).unwrap()).unwrap();
        let b: Vec<f64> = (0..36).map(|i| (i as f64).sin()).collect();
        let sol = conjugate_gradient(&q, &b, 1e-12, 1000).unwrap();
        let back = q.matvec(&sol.x).unwrap();
        assert!(back.iter().zip(&b).all(|(u, v)| (u - v).abs() < 1e-10));
        assert!(sol.iterations <= 36 + 5);
        assert!(matches!(conjugate_gradient(&q, &b, 1e-12, 2), Err(Error::SolveDiverged { iterations: 2, .. })));
        assert_eq!(conjugate_gradient(&q, &[0.0; 36], 1e-12, 10).unwrap().iterations, 0);
    }
}
