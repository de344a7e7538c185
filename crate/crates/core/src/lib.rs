//! Mismatched estimation of rank-one symmetric matrices under Gaussian noise.
//!
//! A statistician observes `Y = sqrt(λ/n) s sᵀ + Z` with `s_i ~ N(0, σ²)` and
//! symmetric Gaussian noise `Z`, but computes the posterior mean of `x xᵀ`
//! under assumed parameters `(σ', λ')`. This crate provides:
//!
//! - [`formulas`]: closed-form large-n asymptotics of the mismatched MSE and
//!   free energy, the Bayes-optimal MMSE, region classification and the
//!   analytic validators (free-energy/MSE differential identity, KL sum rule).
//! - [`curves`]: loci of the phase diagram in the `(σ', λ')` plane.
//! - [`free_prob`]: spectral measures, Hilbert and R-transforms, the rank-one
//!   spherical integral limit and deformed-Wigner edge data.
//! - [`sim`]: finite-n spiked Wigner sampling, the dense symmetric
//!   eigensolver and finite-n spherical integral evaluation.
//! - [`posterior`]: MALA sampling of the mismatched posterior, empirical
//!   MSE and finite-n free-energy experiments.
//!
//! Monte Carlo work is split into independent units keyed by [`rng::RngSpec`]
//! streams and dispatched through [`exec::Exec`]; results do not depend on
//! the number of worker threads.

pub mod curves;
pub mod error;
pub mod estimate;
pub mod exec;
pub mod formulas;
pub mod free_prob;
pub mod linalg;
pub mod params;
pub mod posterior;
pub mod quadrature;
pub mod rng;
pub mod sim;
pub mod validators;

pub use error::{Error, Result};
pub use estimate::Estimate;
pub use exec::Exec;
pub use params::{ProblemParams, Region};
pub use rng::RngSpec;
