//! Priors, Gaussian likelihoods, tempering, and unnormalized posteriors.
//!
//! Log-likelihoods include the full Gaussian normalizing constant
//! `-sum ln(sigma_i sqrt(2 pi))`. Tempering divides the whole log-density by
//! `lambda`.

#[allow(unused_imports)] // inherent when std is linked
use num_traits::Float as _;
use alloc::vec;
use alloc::vec::Vec;
use rand::Rng;
use thiserror::Error;

use crate::distributions::Independent;
use crate::models::{ForwardModel, ModelError};
use crate::stats::log_sum_exp;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_7;

/// Independent prior over the parameters.
pub type Prior = Independent;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BayesError {
    #[error("noise standard deviations must be positive and finite")]
    Noise,
    #[error("data has {data} entries but {noise} noise levels were given")]
    NoiseLength { data: usize, noise: usize },
    #[error("tempering parameter must be >= 1, got {0}")]
    Tempering(f64),
    #[error("Monte Carlo sample size must be positive")]
    SampleSize,
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Additive Gaussian noise likelihood `pi_eps(d - G)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianLikelihood {
    data: Vec<f64>,
    noise_std: Vec<f64>,
    ln_norm: f64,
}

impl GaussianLikelihood {
    pub fn new(data: Vec<f64>, noise_std: Vec<f64>) -> Result<Self, BayesError> {
        if data.len() != noise_std.len() {
            return Err(BayesError::NoiseLength { data: data.len(), noise: noise_std.len() });
        }
        if noise_std.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(BayesError::Noise);
        }
        let ln_norm = -noise_std.iter().map(|s| s.ln() + LN_SQRT_2PI).sum::<f64>();
        Ok(GaussianLikelihood { data, noise_std, ln_norm })
    }

    /// Same noise level on every component.
    pub fn homoscedastic(data: Vec<f64>, sigma: f64) -> Result<Self, BayesError> {
        let n = data.len();
        GaussianLikelihood::new(data, vec![sigma; n])
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn noise_std(&self) -> &[f64] {
        &self.noise_std
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// The constant term; the maximum of the log-likelihood.
    pub fn ln_normalizer(&self) -> f64 {
        self.ln_norm
    }

    /// `ln L(g)`. Panics if `g` has the wrong length.
    pub fn log_likelihood(&self, g: &[f64]) -> f64 {
        assert_eq!(g.len(), self.data.len(), "prediction length does not match data");
        let mut misfit = 0.0;
        for ((d, g), s) in self.data.iter().zip(g).zip(&self.noise_std) {
            let r = (d - g) / s;
            misfit += r * r;
        }
        self.ln_norm - 0.5 * misfit
    }
}

/// `L^(1/lambda)` for `lambda >= 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TemperedLikelihood<'a> {
    base: &'a GaussianLikelihood,
    lambda: f64,
}

impl<'a> TemperedLikelihood<'a> {
    pub fn new(base: &'a GaussianLikelihood, lambda: f64) -> Result<Self, BayesError> {
        if !(lambda >= 1.0) {
            return Err(BayesError::Tempering(lambda));
        }
        Ok(TemperedLikelihood { base, lambda })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn log_tempered(&self, g: &[f64]) -> f64 {
        temper(self.base.log_likelihood(g), self.lambda)
    }
}

/// `ln_l / lambda`, with `lambda = 1` returning `ln_l` unchanged and
/// `lambda = inf` flattening every finite value to zero.
pub fn temper(ln_l: f64, lambda: f64) -> f64 {
    if lambda == 1.0 {
        ln_l
    } else if lambda.is_infinite() {
        if ln_l == f64::NEG_INFINITY {
            f64::NEG_INFINITY
        } else {
            0.0
        }
    } else {
        ln_l / lambda
    }
}

/// `ln L(G(y)) + ln pi(y)`; `-inf` outside the prior support, where the
/// model is not called.
pub fn log_posterior_unnormalized<M: ForwardModel + ?Sized>(
    prior: &Prior,
    lik: &GaussianLikelihood,
    model: &M,
    y: &[f64],
) -> Result<f64, ModelError> {
    let ln_prior = prior.ln_pdf(y);
    if ln_prior == f64::NEG_INFINITY {
        return Ok(f64::NEG_INFINITY);
    }
    let g = model.evaluate(y)?;
    Ok(lik.log_likelihood(&g) + ln_prior)
}

/// A prior, likelihood and forward model bundled as an MCMC target.
#[derive(Debug, Clone)]
pub struct Posterior<M> {
    pub prior: Prior,
    pub likelihood: GaussianLikelihood,
    pub model: M,
}

impl<M: ForwardModel> Posterior<M> {
    pub fn new(prior: Prior, likelihood: GaussianLikelihood, model: M) -> Self {
        Posterior { prior, likelihood, model }
    }

    pub fn dim(&self) -> usize {
        self.prior.dim()
    }

    pub fn ln_density(&self, y: &[f64]) -> Result<f64, ModelError> {
        log_posterior_unnormalized(&self.prior, &self.likelihood, &self.model, y)
    }
}

/// A log-scale estimate with a standard error on the same scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogEstimate {
    pub value: f64,
    pub std_error: f64,
}

/// `ln I` with `I = E_prior[L(G(y))]`, by plain Monte Carlo over the prior.
pub fn log_evidence_estimate<M: ForwardModel + ?Sized, R: Rng + ?Sized>(
    prior: &Prior,
    lik: &GaussianLikelihood,
    model: &M,
    n_mc: usize,
    rng: &mut R,
) -> Result<LogEstimate, BayesError> {
    if n_mc == 0 {
        return Err(BayesError::SampleSize);
    }
    let mut ln_l = Vec::with_capacity(n_mc);
    let mut y = vec![0.0; prior.dim()];
    for _ in 0..n_mc {
        prior.sample_into(rng, &mut y);
        let g = model.evaluate(&y)?;
        ln_l.push(lik.log_likelihood(&g));
    }
    let n = n_mc as f64;
    let value = log_sum_exp(&ln_l) - n.ln();
    if !value.is_finite() {
        return Ok(LogEstimate { value, std_error: f64::INFINITY });
    }
    // Relative standard error of the mean of L equals the SE of ln(mean).
    let mut sum_sq = 0.0;
    for l in &ln_l {
        let r = (l - value).exp();
        sum_sq += (r - 1.0) * (r - 1.0);
    }
    let var = if n_mc > 1 { sum_sq / (n - 1.0) } else { 0.0 };
    Ok(LogEstimate { value, std_error: (var / n).sqrt() })
}
