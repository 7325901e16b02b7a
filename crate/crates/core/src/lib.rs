//! Matrix-free log-determinant estimation for large symmetric positive-definite
//! matrices.
//!
//! The entropic estimator normalizes `A` by its Gershgorin bound, estimates the
//! raw moments of the eigenvalue distribution with probing vectors, fits the
//! maximum-entropy density matching those moments and integrates `log x`
//! against it. Taylor and Chebyshev baselines share the same probe budget.

pub mod cli;
pub mod error;
pub mod gmrf;
pub mod logdet;
pub mod maxent;
pub mod probe;
pub mod quadrature;
pub mod sparse;

pub use error::{Error, Result};
