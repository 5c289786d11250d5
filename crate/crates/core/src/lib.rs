//! Sampling from unnormalized densities with the Schrödinger–Föllmer diffusion
//! with temperatures, plus Langevin baselines and evaluation metrics.
//!
//! Module map:
//! - [`math`]: log-sum-exp, Gauss–Hermite rules, SPD factorization, reproducible
//!   random streams and refinable Brownian increments.
//! - [`targets`]: Gaussian mixtures and the named test densities.
//! - [`drift`]: closed-form, Monte Carlo and quadrature drift evaluators.
//! - [`samplers`]: Euler–Maruyama SFS, ULA, underdamped Euler, BAOAB and the
//!   ensemble runner.
//! - [`metrics`]: Wasserstein-2 estimators, moments, mode weights and strong-error
//!   curves.

pub mod drift;
pub mod error;
pub mod math;
pub mod metrics;
pub mod samplers;
pub mod targets;

pub use error::{Error, Result};
