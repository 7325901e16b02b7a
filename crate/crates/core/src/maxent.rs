//! Maximum-entropy eigenvalue densities on `[0, 1]`.
//!
//! A density is `p(x) = exp(-1 - sum_j alpha_j x^j)`. Coefficients are fitted
//! either by Newton steps on the dual or by cycling through the moment
//! constraints one coefficient at a time. All integrals use a fixed
//! [`QuadratureRule`].

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::QuadratureRule;

/// Exponent magnitude at which the polynomial is clamped before `exp`.
pub const EXPONENT_CLAMP: f64 = 700.0;
const MIN_DAMPING: f64 = 1.0 / (1u64 << 20) as f64;
const MATCH_NEWTON_ITERS: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Init {
    /// All coefficients zero (flat start).
    Zero,
    /// Standard normal coefficients from the given seed.
    Gaussian { seed: u64 },
}

/// How far a single coefficient moves per update.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum StepRule {
    /// `delta = log(int x^i p / mu_i)`, one shot.
    LogRatio,
    /// Starts from the log-ratio step and refines `delta` by Newton's method
    /// until the `i`-th moment matches its target.
    #[default]
    ExactMatch,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum Solver {
    /// Damped Newton steps on the convex dual, all coefficients at once.
    #[default]
    Newton,
    /// Cyclic one-coefficient-at-a-time updates.
    CoordinateSweep(StepRule),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub tol: f64,
    /// Cap on iterations: Newton steps, or full passes for the sweep.
    pub max_iters: usize,
    pub init: Init,
    pub solver: Solver,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions { tol: 1e-6, max_iters: 10_000, init: Init::Zero, solver: Solver::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitDiagnostics {
    /// `max_i |int x^i p - mu_i|` after the last pass.
    pub max_residual: f64,
    pub cycles: usize,
    pub converged: bool,
    /// The exponent hit [`EXPONENT_CLAMP`] somewhere on the grid.
    pub exponent_clamped: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaxEntDensity {
    coefficients: Vec<f64>,
    diagnostics: Option<FitDiagnostics>,
}

impl MaxEntDensity {
    /// A density with the given coefficients and no fit history.
    pub fn from_coefficients(coefficients: Vec<f64>) -> Self {
        MaxEntDensity { coefficients, diagnostics: None }
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    /// Fit history; `None` for densities built from raw coefficients.
    pub fn diagnostics(&self) -> Option<&FitDiagnostics> {
        self.diagnostics.as_ref()
    }

    pub fn converged(&self) -> bool {
        self.diagnostics.is_some_and(|d| d.converged)
    }

    fn exponent(&self, x: f64) -> f64 {
        let poly = self.coefficients.iter().rev().fold(0.0, |acc, &a| acc * x + a);
        (-1.0 - poly).clamp(-EXPONENT_CLAMP, EXPONENT_CLAMP)
    }

    fn eval_unchecked(&self, x: f64) -> f64 {
        self.exponent(x).exp()
    }

    /// `p(x)` for `x` in `(0, 1]`.
    pub fn eval(&self, x: f64) -> Result<f64> {
        if !(x > 0.0 && x <= 1.0) {
            return Err(Error::InvalidArgument(format!("density evaluated outside (0, 1]: {x}")));
        }
        Ok(self.eval_unchecked(x))
    }

    /// `int x^i p(x) dx`.
    pub fn moment(&self, i: usize, rule: &QuadratureRule) -> f64 {
        rule.integrate(|x| x.powi(i as i32) * self.eval_unchecked(x))
    }

    /// `int log(x) p(x) dx`.
    pub fn log_geometric_mean(&self, rule: &QuadratureRule) -> f64 {
        rule.integrate(|x| x.ln() * self.eval_unchecked(x))
    }

    /// Differential entropy `-int p log p`.
    pub fn entropy(&self, rule: &QuadratureRule) -> f64 {
        rule.integrate(|x| {
            let e = self.exponent(x);
            -e * e.exp()
        })
    }

    /// Comma-separated coefficient list.
    pub fn coefficient_list(&self) -> String {
        self.coefficients.iter().map(|a| format!("{a:e}")).collect::<Vec<_>>().join(",")
    }
}

/// Fits coefficients so that `int x^i p = moments[i]` for every `i`.
///
/// Both solvers minimize the convex dual `int p + sum_i alpha_i mu_i`, whose
/// gradient is the moment mismatch. Iteration stops once every residual
/// `|int x^i p - mu_i|` is below `opts.tol`; running out of iterations is
/// reported in the diagnostics rather than as an error.
pub fn fit_maxent(moments: &[f64], rule: &QuadratureRule, opts: &FitOptions) -> Result<MaxEntDensity> {
    if moments.is_empty() {
        return Err(Error::InvalidArgument("at least mu_0 is required".into()));
    }
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance must be positive, got {}", opts.tol)));
    }
    for (index, &value) in moments.iter().enumerate() {
        if !(value > 0.0 && value <= 1.0) {
            return Err(Error::ConstraintDomain { index, value });
        }
    }

    let k1 = moments.len();
    let alpha = match opts.init {
        Init::Zero => vec![0.0; k1],
        Init::Gaussian { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..k1).map(|_| StandardNormal.sample(&mut rng)).collect()
        }
    };
    match opts.solver {
        Solver::Newton => newton(moments, rule, opts, alpha),
        Solver::CoordinateSweep(step) => sweep(moments, rule, opts, step, alpha),
    }
}

/// Quadrature weights and a table of basis polynomials at the nodes.
struct Grid<'a> {
    weights: &'a [f64],
    q: usize,
    table: Vec<f64>,
}

impl<'a> Grid<'a> {
    /// `x_t^i` for `i < rows`.
    fn monomial(rule: &'a QuadratureRule, rows: usize) -> Self {
        let nodes = rule.nodes();
        let q = nodes.len();
        let mut table = vec![1.0; rows * q];
        for i in 1..rows {
            for t in 0..q {
                table[i * q + t] = table[(i - 1) * q + t] * nodes[t];
            }
        }
        Grid { weights: rule.weights(), q, table }
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.table[i * self.q..(i + 1) * self.q]
    }

    /// `-1 - sum_i alpha_i b_i(x_t)` at every node, unclamped.
    fn exponent(&self, alpha: &[f64]) -> Vec<f64> {
        let mut e = vec![-1.0; self.q];
        for (i, &a) in alpha.iter().enumerate() {
            for (et, x) in e.iter_mut().zip(self.row(i)) {
                *et -= a * x;
            }
        }
        e
    }

    /// `w_t p(x_t)`; returns whether the exponent clamp was hit.
    fn weighted(&self, exponent: &[f64], out: &mut [f64]) -> bool {
        let mut clamped = false;
        for ((o, &e), &w) in out.iter_mut().zip(exponent).zip(self.weights) {
            let c = e.clamp(-EXPONENT_CLAMP, EXPONENT_CLAMP);
            clamped |= c != e;
            *o = w * c.exp();
        }
        clamped
    }

    fn moment(&self, i: usize, weighted: &[f64]) -> f64 {
        self.row(i).iter().zip(weighted).map(|(x, w)| x * w).sum()
    }

    fn residuals(&self, weighted: &[f64], moments: &[f64]) -> Vec<f64> {
        moments.iter().enumerate().map(|(i, mu)| self.moment(i, weighted) - mu).collect()
    }
}

/// `int p + sum_i alpha_i mu_i`, minimized by the moment-matching coefficients.
fn dual(weighted: &[f64], alpha: &[f64], moments: &[f64]) -> f64 {
    weighted.iter().sum::<f64>() + alpha.iter().zip(moments).map(|(a, m)| a * m).sum::<f64>()
}

fn finish(alpha: Vec<f64>, residuals: &[f64], cycles: usize, tol: f64, clamped: bool) -> MaxEntDensity {
    let max_residual = max_abs(residuals);
    MaxEntDensity {
        coefficients: alpha,
        diagnostics: Some(FitDiagnostics {
            max_residual,
            cycles,
            converged: max_residual < tol,
            exponent_clamped: clamped,
        }),
    }
}

/// Damped Newton on the dual. The Hessian is the Hankel matrix of moments
/// `int x^{i+j} p`; it is solved after symmetric diagonal scaling, with a
/// growing ridge if the factorization breaks down, and each step is
/// backtracked until the dual decreases sufficiently.
fn newton(moments: &[f64], rule: &QuadratureRule, opts: &FitOptions, mut alpha: Vec<f64>) -> Result<MaxEntDensity> {
    let k1 = moments.len();
    let grid = Grid::monomial(rule, 2 * k1 - 1);
    let mut weighted = vec![0.0; grid.q];
    let mut clamped = grid.weighted(&grid.exponent(&alpha), &mut weighted);
    let mut current = dual(&weighted, &alpha, moments);
    let mut residuals = grid.residuals(&weighted, moments);
    let mut trial_weighted = vec![0.0; grid.q];
    let mut iters = 0;

    while !(max_abs(&residuals) < opts.tol) && iters < opts.max_iters {
        if !current.is_finite() {
            return Err(Error::NumericalFailure { coefficient: argmax_abs(&residuals) });
        }
        iters += 1;
        let hankel: Vec<f64> = (0..2 * k1 - 1).map(|j| grid.moment(j, &weighted)).collect();
        let Some(direction) = newton_direction(&hankel, &residuals) else {
            break;
        };
        // directional derivative of the dual: -residual . direction
        let slope: f64 = -residuals.iter().zip(&direction).map(|(r, d)| r * d).sum::<f64>();
        if !(slope < 0.0) {
            break;
        }

        let mut t = 1.0;
        let mut accepted = false;
        while t > 1e-12 {
            let trial: Vec<f64> = alpha.iter().zip(&direction).map(|(a, d)| a + t * d).collect();
            let trial_clamped = grid.weighted(&grid.exponent(&trial), &mut trial_weighted);
            let value = dual(&trial_weighted, &trial, moments);
            if value.is_finite() && value < current && value <= current + 1e-4 * t * slope {
                alpha = trial;
                std::mem::swap(&mut weighted, &mut trial_weighted);
                current = value;
                clamped |= trial_clamped;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
        residuals = grid.residuals(&weighted, moments);
    }
    Ok(finish(alpha, &residuals, iters, opts.tol, clamped))
}

/// Solves `H d = residual` (the Newton step for the dual) with `H` given by
/// its Hankel sequence.
fn newton_direction(hankel: &[f64], residuals: &[f64]) -> Option<Vec<f64>> {
    let k1 = residuals.len();
    let scale: Vec<f64> = (0..k1).map(|i| 1.0 / hankel[2 * i].sqrt()).collect();
    if scale.iter().any(|s| !s.is_finite()) {
        return None;
    }
    let scaled: Vec<f64> =
        (0..k1 * k1).map(|ij| hankel[ij / k1 + ij % k1] * scale[ij / k1] * scale[ij % k1]).collect();
    let rhs: Vec<f64> = residuals.iter().zip(&scale).map(|(r, s)| r * s).collect();

    let mut ridge = 0.0;
    for _ in 0..20 {
        let mut h = scaled.clone();
        for i in 0..k1 {
            h[i * k1 + i] += ridge;
        }
        if let Some(y) = cholesky_solve(&mut h, k1, &rhs) {
            return Some(y.iter().zip(&scale).map(|(v, s)| v * s).collect());
        }
        ridge = if ridge == 0.0 { 1e-14 } else { ridge * 10.0 };
    }
    None
}

/// In-place dense Cholesky of the `k x k` matrix `h` followed by the solve.
fn cholesky_solve(h: &mut [f64], k: usize, rhs: &[f64]) -> Option<Vec<f64>> {
    for i in 0..k {
        for j in 0..=i {
            let s = h[i * k + j] - (0..j).map(|l| h[i * k + l] * h[j * k + l]).sum::<f64>();
            if i == j {
                if !(s > 0.0) {
                    return None;
                }
                h[i * k + i] = s.sqrt();
            } else {
                h[i * k + j] = s / h[j * k + j];
            }
        }
    }
    let mut y = rhs.to_vec();
    for i in 0..k {
        y[i] = (y[i] - (0..i).map(|l| h[i * k + l] * y[l]).sum::<f64>()) / h[i * k + i];
    }
    for i in (0..k).rev() {
        y[i] = (y[i] - (i + 1..k).map(|l| h[l * k + i] * y[l]).sum::<f64>()) / h[i * k + i];
    }
    y.iter().all(|v| v.is_finite()).then_some(y)
}

/// Cyclic coordinate updates. Shifting `alpha_i` by `log(int x^i p / mu_i)`
/// restores normalization exactly for `i = 0` and moves the `i`-th moment
/// towards its target without overshooting for `i > 0`. If a pass increases
/// the dual, the step of every coefficient whose residual grew is halved.
fn sweep(
    moments: &[f64],
    rule: &QuadratureRule,
    opts: &FitOptions,
    step: StepRule,
    mut alpha: Vec<f64>,
) -> Result<MaxEntDensity> {
    let k1 = moments.len();
    let grid = Grid::monomial(rule, k1);
    let mut exponent = grid.exponent(&alpha);
    let mut weighted = vec![0.0; grid.q];
    let mut clamped = grid.weighted(&exponent, &mut weighted);

    let mut residuals = grid.residuals(&weighted, moments);
    let mut damping = vec![1.0; k1];
    let mut dual_value = dual(&weighted, &alpha, moments);
    let mut cycles = 0;

    while !(max_abs(&residuals) < opts.tol) && cycles < opts.max_iters {
        for i in 0..k1 {
            let current = grid.moment(i, &weighted);
            if !(current.is_finite() && current > 0.0) {
                return Err(Error::NumericalFailure { coefficient: i });
            }
            let row = grid.row(i);
            let mut delta = (current / moments[i]).ln();
            if step == StepRule::ExactMatch {
                delta = match_moment(row, &exponent, grid.weights, moments[i], delta);
            }
            let delta = damping[i] * delta;
            alpha[i] += delta;
            for (e, x) in exponent.iter_mut().zip(row) {
                *e -= delta * x;
            }
            clamped |= grid.weighted(&exponent, &mut weighted);
        }
        cycles += 1;

        let next = grid.residuals(&weighted, moments);
        if !max_abs(&next).is_finite() {
            return Err(Error::NumericalFailure { coefficient: argmax_abs(&next) });
        }
        // Undamped steps never overshoot the coordinate-wise minimizer, so an
        // increase of the dual comes from rounding or the exponent clamp.
        let next_dual = dual(&weighted, &alpha, moments);
        if next_dual > dual_value {
            for i in 0..k1 {
                if next[i].abs() > residuals[i].abs() {
                    damping[i] = (damping[i] * 0.5).max(MIN_DAMPING);
                }
            }
        }
        dual_value = next_dual;
        residuals = next;
    }
    Ok(finish(alpha, &residuals, cycles, opts.tol, clamped))
}

/// Solves `log int x^i p e^{-delta x^i} = log mu_i` for `delta` by Newton's
/// method from `delta0`. The left side is convex and decreasing in `delta`.
fn match_moment(row: &[f64], exponent: &[f64], weights: &[f64], target: f64, delta0: f64) -> f64 {
    let log_target = target.ln();
    let mut delta = delta0;
    for _ in 0..MATCH_NEWTON_ITERS {
        let (mut m1, mut m2) = (0.0, 0.0);
        for ((&x, &e), &w) in row.iter().zip(exponent).zip(weights) {
            let v = w * (e - delta * x).clamp(-EXPONENT_CLAMP, EXPONENT_CLAMP).exp() * x;
            m1 += v;
            m2 += v * x;
        }
        if !(m1 > 0.0 && m2 > 0.0 && m1.is_finite() && m2.is_finite()) {
            return delta0;
        }
        let step = (m1.ln() - log_target) / (m2 / m1);
        delta += step;
        if step.abs() <= 1e-14 * (1.0 + delta.abs()) {
            break;
        }
    }
    if delta.is_finite() {
        delta
    } else {
        delta0
    }
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| if x.abs() > m || x.is_nan() { x.abs() } else { m })
}

fn argmax_abs(v: &[f64]) -> usize {
    v.iter()
        .enumerate()
        .max_by(|a, b| a.1.abs().partial_cmp(&b.1.abs()).unwrap_or(std::cmp::Ordering::Greater))
        .map(|(i, _)| i)
        .unwrap_or(0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform_moments(k: usize) -> Vec<f64> {
        (0..=k).map(|i| 1.0 / (i as f64 + 1.0)).collect()
    }

    #[test]
    fn density_eval_examples() {
        let flat = MaxEntDensity::from_coefficients(vec![0.0; 4]);
        assert!((flat.eval(0.3).unwrap() - (-1f64).exp()).abs() < 1e-15);
        let unit = MaxEntDensity::from_coefficients(vec![-1.0, 0.0, 0.0]);
        assert_eq!(unit.eval(0.7).unwrap(), 1.0);
        assert!(unit.eval(0.0).is_err());
        assert!(unit.eval(1.5).is_err());
        assert!(unit.eval(1.0).is_ok());
    }

    #[test]
    fn uniform_fit() {
        let rule = QuadratureRule::default();
        let d = fit_maxent(&uniform_moments(4), &rule, &FitOptions::default()).unwrap();
        assert!(d.converged());
        assert!((d.coefficients()[0] + 1.0).abs() < 1e-6);
        assert!(d.coefficients()[1..].iter().all(|a| a.abs() < 1e-6));
        for i in 1..100 {
            let x = 0.01 + 0.98 * i as f64 / 100.0;
            assert!((d.eval(x).unwrap() - 1.0).abs() < 1e-2);
        }
        assert!((d.eval(0.5).unwrap() - 1.0).abs() < 1e-2);
        assert!((d.moment(0, &rule) - 1.0).abs() < 1e-6);
        assert!((d.moment(2, &rule) - 1.0 / 3.0).abs() < 1e-3);
        assert!((d.log_geometric_mean(&rule) + 1.0).abs() < 2e-3);
    }

    #[test]
    fn normalization_only_and_midpoint_mean() {
        let rule = QuadratureRule::default();
        for moments in [vec![1.0], vec![1.0, 0.5]] {
            let d = fit_maxent(&moments, &rule, &FitOptions::default()).unwrap();
            assert!(d.converged());
            assert!((d.eval(0.25).unwrap() - 1.0).abs() < 1e-5);
            assert!((d.eval(0.9).unwrap() - 1.0).abs() < 1e-5);
        }
    }

    #[test]
    fn constraint_domain_errors() {
        let rule = QuadratureRule::default();
        let opts = FitOptions::default();
        assert!(matches!(
            fit_maxent(&[1.0, 0.0], &rule, &opts),
            Err(Error::ConstraintDomain { index: 1, .. })
        ));
        assert!(matches!(
            fit_maxent(&[1.0, 1.5], &rule, &opts),
            Err(Error::ConstraintDomain { index: 1, .. })
        ));
        assert!(matches!(
            fit_maxent(&[1.0, f64::NAN], &rule, &opts),
            Err(Error::ConstraintDomain { .. })
        ));
        assert!(fit_maxent(&[1.0], &rule, &FitOptions { tol: 0.0, ..opts }).is_err());
    }

    #[test]
    fn point_mass_moments() {
        let rule = QuadratureRule::default();
        let c: f64 = 0.8;
        let moments: Vec<f64> = (0..=8).map(|k| c.powi(k)).collect();
        let d = fit_maxent(&moments, &rule, &FitOptions::default()).unwrap();
        assert!((d.log_geometric_mean(&rule) - c.ln()).abs() < 0.05);
    }

    #[test]
    fn two_eigenvalue_spectrum() {
        // eigenvalues {1, 0.5}
        let rule = QuadratureRule::default();
        let moments: Vec<f64> = (0..=6).map(|k| 0.5 * (1.0 + 0.5f64.powi(k))).collect();
        let d = fit_maxent(&moments, &rule, &FitOptions::default()).unwrap();
        assert!((d.log_geometric_mean(&rule) - 0.5 * 0.5f64.ln()).abs() < 0.05);
    }

    #[test]
    fn exponent_is_clamped() {
        let d = MaxEntDensity::from_coefficients(vec![-5000.0]);
        assert!(d.eval(0.5).unwrap().is_finite());
    }

    #[test]
    fn serializes_to_coefficients() {
        let d = MaxEntDensity::from_coefficients(vec![-1.0, 0.5]);
        assert_eq!(d.coefficient_list(), "-1e0,5e-1");
        let json = serde_json::to_string(&d).unwrap();
        let back: MaxEntDensity = serde_json::from_str(&json).unwrap();
        assert_eq!(back.coefficients(), d.coefficients());
    }

    /// Moments of `p(x) = 2x`.
    fn linear_moments(k: usize) -> Vec<f64> {
        (0..=k).map(|i| 2.0 / (i as f64 + 2.0)).collect()
    }

    #[test]
    fn uniform_ten_moments() {
        let rule = QuadratureRule::default();
        let moments = uniform_moments(10);
        let d = fit_maxent(&moments, &rule, &FitOptions::default()).unwrap();
        assert!(d.converged());
        for (i, mu) in moments.iter().enumerate() {
            assert!((d.moment(i, &rule) - mu).abs() < 1e-6, "moment {i}");
        }
        assert!((d.log_geometric_mean(&rule) + 1.0).abs() < 2e-3);
    }

    #[test]
    fn solvers_agree() {
        let rule = QuadratureRule::default();
        let moments = linear_moments(3);
        let newton = fit_maxent(&moments, &rule, &FitOptions::default()).unwrap();
        for step in [StepRule::LogRatio, StepRule::ExactMatch] {
            let opts = FitOptions { solver: Solver::CoordinateSweep(step), max_iters: 200_000, ..Default::default() };
            let sweep = fit_maxent(&moments, &rule, &opts).unwrap();
            assert!(sweep.converged(), "{step:?}");
            let gap = (sweep.log_geometric_mean(&rule) - newton.log_geometric_mean(&rule)).abs();
            assert!(gap < 1e-4, "{step:?}: {gap}");
        }
    }

    #[test]
    fn iteration_cap_is_reported() {
        let rule = QuadratureRule::default();
        let opts = FitOptions { max_iters: 1, ..Default::default() };
        let d = fit_maxent(&linear_moments(6), &rule, &opts).unwrap();
        let diag = d.diagnostics().unwrap();
        assert!(!diag.converged);
        assert_eq!(diag.cycles, 1);
        assert!(diag.max_residual >= opts.tol);
    }

    #[test]
    fn initialization_does_not_matter() {
        let rule = QuadratureRule::default();
        let moments = linear_moments(6);
        let tol = 1e-9;
        let lgm: Vec<f64> = [Init::Zero, Init::Gaussian { seed: 1 }, Init::Gaussian { seed: 2 }]
            .into_iter()
            .map(|init| {
                let d = fit_maxent(&moments, &rule, &FitOptions { tol, init, ..Default::default() }).unwrap();
                assert!(d.converged());
                d.log_geometric_mean(&rule)
            })
            .collect();
        assert!((lgm[0] + 0.5).abs() < 1e-3, "{}", lgm[0]);
        assert!((lgm[1] - lgm[0]).abs() < 10.0 * tol);
        assert!((lgm[2] - lgm[0]).abs() < 10.0 * tol);
    }

    #[test]
    fn quadrature_refinement_is_stable() {
        let moments = linear_moments(8);
        let opts = FitOptions { tol: 1e-10, ..Default::default() };
        let coarse = QuadratureRule::gauss_legendre(512).unwrap();
        let fine = QuadratureRule::gauss_legendre(1024).unwrap();
        let a = fit_maxent(&moments, &coarse, &opts).unwrap().log_geometric_mean(&coarse);
        let b = fit_maxent(&moments, &fine, &opts).unwrap().log_geometric_mean(&fine);
        assert!((a - b).abs() < 1e-4, "{a} vs {b}");
    }

    #[test]
    fn uniform_entropy_is_maximal() {
        let rule = QuadratureRule::gauss_legendre(64).unwrap();
        let k = 3;
        let d = fit_maxent(&uniform_moments(k), &rule, &FitOptions { tol: 1e-12, ..Default::default() }).unwrap();
        let best = d.entropy(&rule);
        assert!(best.abs() < 1e-9, "{best}");

        let (x, w) = (rule.nodes(), rule.weights());
        let p: Vec<f64> = x.iter().map(|&x| d.eval(x).unwrap()).collect();
        // orthonormal basis of monomials up to x^k under the weighted inner product
        let inner = |a: &[f64], b: &[f64]| a.iter().zip(b).zip(w).map(|((a, b), w)| a * b * w).sum::<f64>();
        let mut basis: Vec<Vec<f64>> = Vec::new();
        for i in 0..=k {
            let mut v: Vec<f64> = x.iter().map(|x| x.powi(i as i32)).collect();
            for b in &basis {
                let c = inner(&v, b);
                v.iter_mut().zip(b).for_each(|(v, b)| *v -= c * b);
            }
            let norm = inner(&v, &v).sqrt();
            basis.push(v.into_iter().map(|v| v / norm).collect());
        }

        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let mut q: Vec<f64> = (0..x.len()).map(|_| StandardNormal.sample(&mut rng)).collect();
            for b in &basis {
                let c = inner(&q, b);
                q.iter_mut().zip(b).for_each(|(q, b)| *q -= c * b);
            }
            let peak = q.iter().fold(0.0f64, |m, q| m.max(q.abs()));
            let eps = 0.5 * p.iter().cloned().fold(f64::INFINITY, f64::min) / peak;
            let perturbed: Vec<f64> = p.iter().zip(&q).map(|(p, q)| p + eps * q).collect();
            assert!((inner(&perturbed, &basis[0]) - inner(&p, &basis[0])).abs() < 1e-12);
            let h: f64 = -perturbed.iter().zip(w).map(|(p, w)| w * p * p.ln()).sum::<f64>();
            assert!(h <= best + 1e-12, "{h} > {best}");
        }
    }
}
