//! Posterior-focused polynomial chaos surrogates for Bayesian inverse problems.
//!
//! The crate builds polynomial chaos (PC) approximations of expensive forward
//! models over a sequence of Gaussian biasing distributions chosen by a
//! tempered cross-entropy iteration, so that the final surrogate is accurate
//! where the posterior lives rather than over the whole prior. Posteriors
//! induced by the surrogate are then explored with an independence
//! Metropolis-Hastings sampler (driven by the final biasing distribution) or
//! an adaptive random-walk sampler with delayed rejection.
//!
//! Module map:
//!
//! - [`polynomials`]: orthonormal Hermite/Legendre families and multi-index sets.
//! - [`quadrature`]: Gauss, Clenshaw-Curtis, tensor and Smolyak rules.
//! - [`distributions`]: independent product distributions shared by priors,
//!   PC input measures and biasing distributions.
//! - [`polychaos`]: non-intrusive spectral projection and surrogate evaluation.
//! - [`models`]: forward-model trait plus the source-inversion and nonlinear
//!   heat-conduction solvers.
//! - [`bayes`]: priors, Gaussian and tempered likelihoods, posteriors.
//! - [`adaptive`]: the tempered cross-entropy surrogate construction loop.
//! - [`mcmc`]: independence and adaptive random-walk (DRAM) samplers.
//! - [`analysis`]: KDE, KL divergence, flux moments.
//!
//! The crate is `no_std` and only needs `alloc`; floating-point special
//! functions come from `libm` through `num-traits`.

#![no_std]
#![warn(missing_debug_implementations)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod adaptive;
pub mod analysis;
pub mod bayes;
pub mod distributions;
pub mod linalg;
pub mod mcmc;
pub mod models;
pub mod polychaos;
pub mod polynomials;
pub mod quadrature;
pub mod stats;

pub use adaptive::{BiasingParams, CeConfig, CeOutcome};
pub use bayes::{GaussianLikelihood, Posterior, Prior, TemperedLikelihood};
pub use distributions::{Independent, Marginal};
pub use mcmc::Chain;
pub use models::{ForwardModel, ModelError};
pub use polychaos::{PcSurrogate, Projection};
pub use polynomials::{MultiIndex, MultiIndexSet, PolynomialFamily};
pub use quadrature::QuadratureRule;
