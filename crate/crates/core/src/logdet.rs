//! End-to-end log-determinant estimators.
//!
//! All three methods scale `A` by its Gershgorin bound `c` so that the
//! spectrum of `B = A / c` lies in `(0, 1]`, spend `k` matvecs per probe, and
//! add back `n log c`. The scaling is applied inside the operator; `A` is
//! never copied.

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::maxent::{fit_maxent, FitDiagnostics, FitOptions, Init, Solver};
use crate::probe::{map_sampling, power_traces, MomentEstimate, ProbeKind, Sampling};
use crate::quadrature::{QuadratureRule, DEFAULT_QUAD_NODES};
use crate::sparse::{dot, Affine, LinearOperator, SparseSymMatrix};

pub const DEFAULT_CHEBYSHEV_DELTA: f64 = 1e-4;

/// Relative spread `(mu_2 - mu_1^2) / mu_1^2` below which the moments are
/// treated as a single eigenvalue.
pub const POINT_MASS_SPREAD: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    MaxEnt,
    Taylor,
    Chebyshev,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::MaxEnt, Method::Taylor, Method::Chebyshev];

    pub fn name(self) -> &'static str {
        match self {
            Method::MaxEnt => "maxent",
            Method::Taylor => "taylor",
            Method::Chebyshev => "chebyshev",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "maxent" | "entropic" => Ok(Method::MaxEnt),
            "taylor" => Ok(Method::Taylor),
            "chebyshev" => Ok(Method::Chebyshev),
            other => Err(Error::InvalidArgument(format!("unknown method `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorConfig {
    /// Number of moments / polynomial degree `k`.
    pub moments: usize,
    pub sampling: Sampling,
    pub tol: f64,
    pub max_iters: usize,
    pub quad_nodes: usize,
    pub init: Init,
    pub solver: Solver,
    /// Assumed lower spectral bound of `B` for the Chebyshev baseline.
    pub chebyshev_delta: f64,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        EstimatorConfig {
            moments: 10,
            sampling: Sampling::default(),
            tol: 1e-6,
            max_iters: 10_000,
            quad_nodes: DEFAULT_QUAD_NODES,
            init: Init::Zero,
            solver: Solver::default(),
            chebyshev_delta: DEFAULT_CHEBYSHEV_DELTA,
        }
    }
}

impl EstimatorConfig {
    pub fn new(moments: usize, probes: usize, kind: ProbeKind, seed: u64) -> Self {
        EstimatorConfig {
            moments,
            sampling: Sampling::Probes { kind, count: probes, seed },
            ..Default::default()
        }
    }

    fn fit_options(&self) -> FitOptions {
        FitOptions { tol: self.tol, max_iters: self.max_iters, init: self.init, solver: self.solver }
    }

    fn check(&self) -> Result<()> {
        if self.moments < 1 {
            return Err(Error::InvalidArgument("at least one moment is required".into()));
        }
        if let Sampling::Probes { count: 0, .. } = self.sampling {
            return Err(Error::InvalidArgument("at least one probe is required".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogDetResult {
    /// Natural-log determinant estimate.
    pub estimate: f64,
    pub method: Method,
    /// Scale `c` with `B = A / c`.
    pub normalization: f64,
    pub moments: usize,
    pub probes: usize,
    pub matvecs: usize,
    /// MaxEnt only.
    pub fit: Option<FitDiagnostics>,
    /// MaxEnt only: moments described a single eigenvalue, integrated exactly.
    pub point_mass: bool,
    /// Moments moved into `(0, 1]` before fitting.
    pub clamped_moments: usize,
    pub wall_time: Duration,
}

impl LogDetResult {
    /// True when the fit did not reach tolerance or hit the exponent clamp.
    pub fn degraded(&self) -> bool {
        self.fit.is_some_and(|f| !f.converged || f.exponent_clamped)
    }
}

/// `|estimate - exact| / |exact|`.
pub fn relative_error(result: &LogDetResult, exact: f64) -> Result<f64> {
    relative_error_of(result.estimate, exact)
}

pub fn relative_error_of(estimate: f64, exact: f64) -> Result<f64> {
    if exact == 0.0 {
        return Err(Error::UndefinedRelativeError);
    }
    Ok((estimate - exact).abs() / exact.abs())
}

fn normalization(a: &SparseSymMatrix) -> Result<f64> {
    let c = a.gershgorin_upper();
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "Gershgorin bound {c} is not positive; matrix cannot be positive definite"
        )));
    }
    Ok(c)
}

/// Entropic estimator: stochastic moments of `A / c`, maximum-entropy fit,
/// `n int log(x) p(x) dx + n log c`.
pub fn logdet_maxent(a: &SparseSymMatrix, cfg: &EstimatorConfig) -> Result<LogDetResult> {
    cfg.check()?;
    if cfg.moments < 2 {
        return Err(Error::InvalidArgument("the entropic estimator needs at least two moments".into()));
    }
    let start = Instant::now();
    let c = normalization(a)?;
    let b = Affine::new(a, 1.0 / c, 0.0);
    let moments = power_traces(&b, cfg.moments, &cfg.sampling)?;
    let mut result = maxent_from_moments(&moments, c, cfg)?;
    result.wall_time = start.elapsed();
    Ok(result)
}

/// Entropic estimate from moments of `A / normalization` computed elsewhere
/// (exact, cached, or stochastic).
pub fn maxent_from_moments(
    estimate: &MomentEstimate,
    normalization: f64,
    cfg: &EstimatorConfig,
) -> Result<LogDetResult> {
    let start = Instant::now();
    let n = estimate.dim as f64;
    let (moments, clamped) = estimate.clamped_moments();
    let rule = QuadratureRule::gauss_legendre(cfg.quad_nodes)?;

    let (log_mean, fit, point_mass) = if is_point_mass(&moments) {
        // The moment sequence is that of a single atom at mu_1, the limit of
        // the maximum-entropy family as the spread vanishes.
        (moments[1].ln(), None, true)
    } else {
        let density = fit_maxent(&moments, &rule, &cfg.fit_options())?;
        if !density.converged() {
            warn!("maximum-entropy fit stopped early: {:?}", density.diagnostics());
        }
        (density.log_geometric_mean(&rule), density.diagnostics().copied(), false)
    };

    Ok(LogDetResult {
        estimate: n * log_mean + n * normalization.ln(),
        method: Method::MaxEnt,
        normalization,
        moments: estimate.order(),
        probes: estimate.num_probes,
        matvecs: estimate.matvecs,
        fit,
        point_mass,
        clamped_moments: clamped,
        wall_time: start.elapsed(),
    })
}

fn is_point_mass(moments: &[f64]) -> bool {
    if moments.len() < 3 {
        return false;
    }
    let (m1, m2) = (moments[1], moments[2]);
    m2 - m1 * m1 <= POINT_MASS_SPREAD * m1 * m1
}

/// Taylor baseline: `log B = -sum_{j=1..k} (I - B)^j / j`.
pub fn logdet_taylor(a: &SparseSymMatrix, cfg: &EstimatorConfig) -> Result<LogDetResult> {
    cfg.check()?;
    let start = Instant::now();
    let c = normalization(a)?;
    let n = a.dim();
    let residual = Affine::new(a, -1.0 / c, 1.0);
    let traces = power_traces(&residual, cfg.moments, &cfg.sampling)?;
    let series: f64 = (1..=cfg.moments).map(|j| traces.trace_estimates[j] / j as f64).sum();
    Ok(LogDetResult {
        estimate: n as f64 * c.ln() - series,
        method: Method::Taylor,
        normalization: c,
        moments: cfg.moments,
        probes: cfg.sampling.probe_count(n),
        matvecs: traces.matvecs,
        fit: None,
        point_mass: false,
        clamped_moments: 0,
        wall_time: start.elapsed(),
    })
}

/// Chebyshev baseline: degree-`k` interpolant of `log` on `[delta, 1]`,
/// traced through the three-term recurrence.
pub fn logdet_chebyshev(a: &SparseSymMatrix, cfg: &EstimatorConfig) -> Result<LogDetResult> {
    cfg.check()?;
    let delta = cfg.chebyshev_delta;
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidArgument(format!("Chebyshev delta must lie in (0, 1), got {delta}")));
    }
    let start = Instant::now();
    let c = normalization(a)?;
    let n = a.dim();
    let k = cfg.moments;
    let coeffs = chebyshev_coefficients(f64::ln, k, delta, 1.0);

    // [delta, 1] -> [-1, 1]
    let x = Affine::new(a, 2.0 / (c * (1.0 - delta)), -(1.0 + delta) / (1.0 - delta));
    let per_probe = map_sampling(n, &cfg.sampling, |z| chebyshev_quadratic_form(&x, z, &coeffs))?;
    let trace = per_probe.iter().sum::<f64>() / per_probe.len() as f64;

    Ok(LogDetResult {
        estimate: n as f64 * c.ln() + trace,
        method: Method::Chebyshev,
        normalization: c,
        moments: k,
        probes: per_probe.len(),
        matvecs: per_probe.len() * k,
        fit: None,
        point_mass: false,
        clamped_moments: 0,
        wall_time: start.elapsed(),
    })
}

/// `z^T (sum_j c_j T_j(X)) z` using `coeffs.len() - 1` applications of `X`.
fn chebyshev_quadratic_form<Op: LinearOperator + ?Sized>(x: &Op, z: &[f64], coeffs: &[f64]) -> f64 {
    let n = z.len();
    let mut prev = z.to_vec();
    let mut total = coeffs[0] * dot(z, z);
    if coeffs.len() == 1 {
        return total;
    }
    let mut cur = vec![0.0; n];
    x.apply(&prev, &mut cur);
    total += coeffs[1] * dot(z, &cur);
    let mut next = vec![0.0; n];
    for &cj in &coeffs[2..] {
        x.apply(&cur, &mut next);
        for (nx, pv) in next.iter_mut().zip(&prev) {
            *nx = 2.0 * *nx - pv;
        }
        total += cj * dot(z, &next);
        std::mem::swap(&mut prev, &mut cur);
        std::mem::swap(&mut cur, &mut next);
    }
    total
}

/// Coefficients of the degree-`degree` Chebyshev interpolant of `f` on
/// `[lo, hi]` at the `degree + 1` Chebyshev points of the first kind.
pub fn chebyshev_coefficients<F: Fn(f64) -> f64>(f: F, degree: usize, lo: f64, hi: f64) -> Vec<f64> {
    let points = degree + 1;
    let theta: Vec<f64> =
        (0..points).map(|l| std::f64::consts::PI * (l as f64 + 0.5) / points as f64).collect();
    let values: Vec<f64> =
        theta.iter().map(|t| f(0.5 * (hi - lo) * t.cos() + 0.5 * (hi + lo))).collect();
    (0..points)
        .map(|j| {
            let s: f64 = values.iter().zip(&theta).map(|(v, t)| v * (j as f64 * t).cos()).sum();
            let c = 2.0 * s / points as f64;
            if j == 0 {
                c / 2.0
            } else {
                c
            }
        })
        .collect()
}

/// Evaluates a Chebyshev series on `[lo, hi]` at `x` (Clenshaw).
pub fn chebyshev_eval(coeffs: &[f64], x: f64, lo: f64, hi: f64) -> f64 {
    let t = (2.0 * x - (hi + lo)) / (hi - lo);
    let (mut b1, mut b2) = (0.0, 0.0);
    for &c in coeffs.iter().skip(1).rev() {
        let b0 = 2.0 * t * b1 - b2 + c;
        b2 = b1;
        b1 = b0;
    }
    t * b1 - b2 + coeffs[0]
}

/// Runs `method` with the shared configuration.
pub fn estimate(a: &SparseSymMatrix, method: Method, cfg: &EstimatorConfig) -> Result<LogDetResult> {
    match method {
        Method::MaxEnt => logdet_maxent(a, cfg),
        Method::Taylor => logdet_taylor(a, cfg),
        Method::Chebyshev => logdet_chebyshev(a, cfg),
    }
}
