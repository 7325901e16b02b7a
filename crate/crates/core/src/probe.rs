//! Probing vectors and stochastic estimates of `Tr(B^k)`.
//!
//! Every probe draws from its own ChaCha stream (`seed`, probe index), so the
//! estimates do not depend on how probes are scheduled across threads. Each
//! probe is propagated once through the Krylov recurrence `w_j = B w_{j-1}`
//! and contributes `z^T w_j` to every power.

use std::fmt;
use std::str::FromStr;

use log::warn;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sparse::{dot, LinearOperator, SparseSymMatrix};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ProbeKind {
    /// Hutchinson: i.i.d. +-1 entries.
    #[default]
    Rademacher,
    Gaussian,
    /// Uniform direction, scaled to norm `sqrt(n)`.
    UnitSphere,
    /// `sqrt(n) e_i` for a uniformly drawn column `i`.
    FixedBasis,
    /// Mutually unbiased bases. Enumerated for completeness; drawing fails.
    Mubs,
}

impl ProbeKind {
    pub const IMPLEMENTED: [ProbeKind; 4] =
        [ProbeKind::Rademacher, ProbeKind::Gaussian, ProbeKind::UnitSphere, ProbeKind::FixedBasis];

    pub fn name(self) -> &'static str {
        match self {
            ProbeKind::Rademacher => "rademacher",
            ProbeKind::Gaussian => "gaussian",
            ProbeKind::UnitSphere => "sphere",
            ProbeKind::FixedBasis => "basis",
            ProbeKind::Mubs => "mubs",
        }
    }

    fn ensure_implemented(self) -> Result<()> {
        match self {
            ProbeKind::Mubs => Err(Error::Unimplemented("mutually-unbiased-bases probing")),
            _ => Ok(()),
        }
    }
}

impl fmt::Display for ProbeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ProbeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rademacher" | "hutchinson" => Ok(ProbeKind::Rademacher),
            "gaussian" => Ok(ProbeKind::Gaussian),
            "sphere" | "unit-sphere" => Ok(ProbeKind::UnitSphere),
            "basis" | "fixed-basis" => Ok(ProbeKind::FixedBasis),
            "mubs" => Ok(ProbeKind::Mubs),
            other => Err(Error::InvalidArgument(format!("unknown probe kind `{other}`"))),
        }
    }
}

/// Independent generator for probe `index` under `seed`.
pub fn probe_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Draws one probe vector with `E[z z^T] = I`.
pub fn draw_probe<R: Rng + ?Sized>(kind: ProbeKind, n: usize, rng: &mut R) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::InvalidArgument("probe dimension must be positive".into()));
    }
    kind.ensure_implemented()?;
    let z = match kind {
        ProbeKind::Rademacher => (0..n).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect(),
        ProbeKind::Gaussian => (0..n).map(|_| StandardNormal.sample(rng)).collect(),
        ProbeKind::UnitSphere => {
            let mut z: Vec<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
            let scale = (n as f64).sqrt() / dot(&z, &z).sqrt();
            z.iter_mut().for_each(|v| *v *= scale);
            z
        }
        ProbeKind::FixedBasis => {
            let mut z = vec![0.0; n];
            z[rng.random_range(0..n)] = (n as f64).sqrt();
            z
        }
        ProbeKind::Mubs => unreachable!(),
    };
    Ok(z)
}

/// Runs `per_probe` on `m` independent probes and returns the per-probe
/// outputs in probe order.
pub fn map_probes<T, F>(n: usize, m: usize, kind: ProbeKind, seed: u64, per_probe: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&[f64]) -> T + Sync,
{
    if m == 0 {
        return Err(Error::InvalidArgument("at least one probe is required".into()));
    }
    kind.ensure_implemented()?;
    (0..m as u64)
        .into_par_iter()
        .map(|i| {
            let z = draw_probe(kind, n, &mut probe_rng(seed, i))?;
            Ok(per_probe(&z))
        })
        .collect()
}

/// `[z^T z, z^T B z, ..., z^T B^k z]` via `k` matvecs.
pub fn krylov_quadratic_forms<Op: LinearOperator + ?Sized>(op: &Op, z: &[f64], k_max: usize) -> Vec<f64> {
    let mut forms = Vec::with_capacity(k_max + 1);
    forms.push(dot(z, z));
    let mut w = z.to_vec();
    let mut next = vec![0.0; z.len()];
    for _ in 0..k_max {
        op.apply(&w, &mut next);
        std::mem::swap(&mut w, &mut next);
        forms.push(dot(z, &w));
    }
    forms
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum MomentSource {
    Probes { kind: ProbeKind, seed: u64 },
    /// Exhaustive sweep over the standard basis; exact up to rounding.
    BasisSweep,
    /// Supplied by the caller.
    Supplied,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentEstimate {
    pub dim: usize,
    /// Raw spectral moments `mu_0 = 1, mu_1, ..., mu_k`.
    pub moments: Vec<f64>,
    /// Estimated `Tr(B^j)`, with `trace_estimates[0] = n`.
    pub trace_estimates: Vec<f64>,
    /// Sample variance of the per-probe moment values (zero for index 0).
    pub variances: Vec<f64>,
    pub num_probes: usize,
    pub source: MomentSource,
    pub matvecs: usize,
}

impl MomentEstimate {
    /// Wraps externally computed moments; `moments[0]` must be 1.
    pub fn supplied(dim: usize, moments: Vec<f64>) -> Result<Self> {
        if moments.first() != Some(&1.0) {
            return Err(Error::InvalidArgument("supplied moments must start with mu_0 = 1".into()));
        }
        let trace_estimates = moments.iter().map(|m| m * dim as f64).collect();
        let variances = vec![0.0; moments.len()];
        Ok(MomentEstimate {
            dim,
            moments,
            trace_estimates,
            variances,
            num_probes: 0,
            source: MomentSource::Supplied,
            matvecs: 0,
        })
    }

    fn from_forms(dim: usize, per_probe: &[Vec<f64>], source: MomentSource) -> Self {
        let m = per_probe.len();
        let k1 = per_probe[0].len();
        let n = dim as f64;
        let mut moments = vec![0.0; k1];
        let mut variances = vec![0.0; k1];
        for j in 1..k1 {
            // fixed summation order: probe index
            let mean = per_probe.iter().map(|f| f[j] / n).sum::<f64>() / m as f64;
            moments[j] = mean;
            if m > 1 {
                variances[j] =
                    per_probe.iter().map(|f| (f[j] / n - mean).powi(2)).sum::<f64>() / (m - 1) as f64;
            }
        }
        moments[0] = 1.0;
        let trace_estimates = moments.iter().map(|mu| mu * n).collect();
        MomentEstimate {
            dim,
            moments,
            trace_estimates,
            variances,
            num_probes: m,
            source,
            matvecs: m * (k1 - 1),
        }
    }

    pub fn order(&self) -> usize {
        self.moments.len() - 1
    }

    /// Standard error of each moment estimate.
    pub fn standard_errors(&self) -> Vec<f64> {
        let m = self.num_probes.max(1) as f64;
        self.variances.iter().map(|v| (v / m).sqrt()).collect()
    }

    /// Moments clamped into `(0, 1]` for the density fitter, plus the number
    /// of entries that had to be moved.
    pub fn clamped_moments(&self) -> (Vec<f64>, usize) {
        let mut clamped = 0;
        let out = self
            .moments
            .iter()
            .enumerate()
            .map(|(i, &mu)| {
                if mu.is_nan() {
                    return mu;
                }
                let c = mu.clamp(f64::MIN_POSITIVE, 1.0);
                if c != mu {
                    warn!("moment {i} = {mu:e} clamped to {c:e}");
                    clamped += 1;
                }
                c
            })
            .collect();
        (out, clamped)
    }
}

/// Stochastic estimate of the raw moments `Tr(B^j) / n`, `j = 0..=k_max`.
///
/// Consumes exactly `m * k_max` applications of `op`.
pub fn estimate_power_traces<Op: LinearOperator + ?Sized>(
    op: &Op,
    k_max: usize,
    m: usize,
    kind: ProbeKind,
    seed: u64,
) -> Result<MomentEstimate> {
    if k_max == 0 {
        return Err(Error::InvalidArgument("k_max must be at least 1".into()));
    }
    let n = op.dim();
    let forms = map_probes(n, m, kind, seed, |z| krylov_quadratic_forms(op, z, k_max))?;
    Ok(MomentEstimate::from_forms(n, &forms, MomentSource::Probes { kind, seed }))
}

/// Exact moments by sweeping every column of the identity (`n * k_max` matvecs).
pub fn basis_sweep_power_traces<Op: LinearOperator + ?Sized>(op: &Op, k_max: usize) -> Result<MomentEstimate> {
    if k_max == 0 {
        return Err(Error::InvalidArgument("k_max must be at least 1".into()));
    }
    let n = op.dim();
    let forms = map_sampling(n, &Sampling::BasisSweep, |z| krylov_quadratic_forms(op, z, k_max))?;
    Ok(MomentEstimate::from_forms(n, &forms, MomentSource::BasisSweep))
}

/// Where quadratic forms come from: random probes, or an exhaustive sweep of
/// the scaled standard basis (exact, `n` "probes").
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Sampling {
    Probes { kind: ProbeKind, count: usize, seed: u64 },
    BasisSweep,
}

impl Default for Sampling {
    fn default() -> Self {
        Sampling::Probes { kind: ProbeKind::Rademacher, count: 30, seed: 0 }
    }
}

impl Sampling {
    /// Number of probe vectors used on an `n`-dimensional problem.
    pub fn probe_count(&self, n: usize) -> usize {
        match *self {
            Sampling::Probes { count, .. } => count,
            Sampling::BasisSweep => n,
        }
    }
}

/// [`map_probes`] generalized over [`Sampling`].
pub fn map_sampling<T, F>(n: usize, sampling: &Sampling, per_probe: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&[f64]) -> T + Sync,
{
    match *sampling {
        Sampling::Probes { kind, count, seed } => map_probes(n, count, kind, seed, per_probe),
        Sampling::BasisSweep => {
            let scale = (n as f64).sqrt();
            Ok((0..n)
                .into_par_iter()
                .map(|i| {
                    let mut z = vec![0.0; n];
                    z[i] = scale;
                    per_probe(&z)
                })
                .collect())
        }
    }
}

/// Moments of `op` under either sampling mode.
pub fn power_traces<Op: LinearOperator + ?Sized>(op: &Op, k_max: usize, sampling: &Sampling) -> Result<MomentEstimate> {
    match *sampling {
        Sampling::Probes { kind, count, seed } => estimate_power_traces(op, k_max, count, kind, seed),
        Sampling::BasisSweep => basis_sweep_power_traces(op, k_max),
    }
}

/// Analytic variance of a single-probe estimate `z^T A z` of `Tr(A)`.
///
/// Dense-path helper for tests and diagnostics. The unit-sphere entry uses
/// `2n/(n+2) (Tr(A^2) - Tr(A)^2 / n)`.
pub fn single_shot_variance(kind: ProbeKind, a: &SparseSymMatrix) -> f64 {
    let d = a.dim() as f64;
    let frob2: f64 = a.values().iter().map(|v| v * v).sum();
    let diag = a.diagonal();
    let trace: f64 = diag.iter().sum();
    let diag2: f64 = diag.iter().map(|v| v * v).sum();
    match kind {
        ProbeKind::Gaussian => 2.0 * frob2,
        ProbeKind::Rademacher => 2.0 * (frob2 - diag2),
        ProbeKind::FixedBasis => d * diag2 - trace * trace,
        ProbeKind::UnitSphere => 2.0 * d / (d + 2.0) * (frob2 - trace * trace / d),
        ProbeKind::Mubs => d / (d + 1.0) * frob2 - trace * trace / (d + 1.0),
    }
}
