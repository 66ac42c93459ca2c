//! Gradient estimation for expectations `d/dtheta E_{x ~ p(x;theta)}[phi(x)]`
//! with likelihood-ratio, reparameterization, and importance-sampled
//! slice-ratio estimators, plus the variance benchmarks and an
//! evolution-strategies optimizer built on top of them.
//!
//! Module map:
//!
//! - [`specfn`]: special functions (erf family, normal quantile, log-gamma,
//!   Lambert W, incomplete beta/gamma) and truncated-normal sampling.
//! - [`dist`]: densities, CDFs and deterministic samplers for the base and
//!   importance-sampling distributions (Gaussian, symmetric Beta, B, W, L,
//!   truncated-ratio, BetaSlice, chi).
//! - [`estimator`]: the gradient estimators themselves, antithetic pairing,
//!   baselines, and the per-dimension importance scheme.
//! - [`analysis`]: analytic accuracy/variance curves `t(c)`, `v(c)` of the
//!   truncated-ratio family and the offset-selection guideline table.
//! - [`bench`]: quadratic-objective variance benchmarks with bootstrap
//!   confidence intervals and distribution conformance reports.
//! - [`es`]: evolution strategies over policy parameters, with SGD/Adam and
//!   a cart-pole swing-up environment.
//! - [`rng`]: label-addressed deterministic RNG substreams.
//!
//! All estimation is reproducible: results depend only on the master seed
//! and the task labels, never on thread count or scheduling.

pub mod analysis;
pub mod bench;
pub mod dist;
pub mod error;
pub mod es;
pub mod estimator;
pub mod gof;
pub mod quad;
pub mod rng;
pub mod specfn;

pub use error::{Error, Result};
