//! Metropolis-Hastings samplers and chain diagnostics.
//!
//! The independence sampler proposes from a fixed Gaussian (the final
//! biasing distribution). The random-walk sampler is adaptive Metropolis
//! with an optional single delayed-rejection stage (DRAM). All acceptance
//! ratios are formed in log space; a `-inf` proposal is always rejected.

#[allow(unused_imports)] // inherent when std is linked
use num_traits::Float as _;
use alloc::vec;
use alloc::vec::Vec;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::adaptive::BiasingParams;
use crate::bayes::Posterior;
use crate::linalg::{cholesky, lower_mul, lower_solve};
use crate::models::{ForwardModel, ModelError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum McmcError {
    #[error("starting point has zero target density")]
    BadStart,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },
    #[error("proposal covariance is not symmetric positive definite")]
    Covariance,
    #[error("burn-in {burn_in} must be smaller than the chain length {steps}")]
    BurnIn { burn_in: usize, steps: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Unnormalized log-density that a chain targets.
pub trait LogTarget {
    fn dim(&self) -> usize;

    fn ln_density(&self, y: &[f64]) -> Result<f64, ModelError>;
}

impl<M: ForwardModel> LogTarget for Posterior<M> {
    fn dim(&self) -> usize {
        Posterior::dim(self)
    }

    fn ln_density(&self, y: &[f64]) -> Result<f64, ModelError> {
        Posterior::ln_density(self, y)
    }
}

impl<T: LogTarget + ?Sized> LogTarget for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn ln_density(&self, y: &[f64]) -> Result<f64, ModelError> {
        (**self).ln_density(y)
    }
}

/// Closure-backed target.
pub struct FnTarget<F> {
    dim: usize,
    f: F,
}

impl<F> core::fmt::Debug for FnTarget<F> {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("FnTarget").field("dim", &self.dim).finish()
    }
}

impl<F: Fn(&[f64]) -> f64> FnTarget<F> {
    pub fn new(dim: usize, f: F) -> Self {
        FnTarget { dim, f }
    }
}

impl<F: Fn(&[f64]) -> f64> LogTarget for FnTarget<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn ln_density(&self, y: &[f64]) -> Result<f64, ModelError> {
        Ok((self.f)(y))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RandomWalkConfig {
    /// Row-major `n x n` initial proposal covariance.
    pub covariance: Vec<f64>,
    pub adapt: bool,
    /// First step at which the covariance is re-estimated.
    pub adapt_start: usize,
    pub adapt_interval: usize,
    /// Adapted covariance is `scale (Cov + epsilon I)`; `None` means
    /// `2.38^2 / n`.
    pub scale: Option<f64>,
    pub epsilon: f64,
    /// Number of delayed-rejection stages, 0 or 1.
    pub dr_stages: usize,
    /// Covariance multiplier for the delayed-rejection proposal.
    pub dr_scale: f64,
}

impl RandomWalkConfig {
    /// Standard DRAM settings around an initial covariance.
    pub fn dram(covariance: Vec<f64>) -> Self {
        RandomWalkConfig {
            covariance,
            adapt: true,
            adapt_start: 1000,
            adapt_interval: 100,
            scale: None,
            epsilon: 1e-10,
            dr_stages: 1,
            dr_scale: 0.25,
        }
    }

    /// Diagonal covariance from per-coordinate step sizes.
    pub fn diagonal(std: &[f64]) -> Vec<f64> {
        let n = std.len();
        let mut c = vec![0.0; n * n];
        for (i, s) in std.iter().enumerate() {
            c[i * n + i] = s * s;
        }
        c
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SamplerKind {
    Independence(BiasingParams),
    RandomWalk(RandomWalkConfig),
}

impl SamplerKind {
    pub fn name(&self) -> &'static str {
        match self {
            SamplerKind::Independence(_) => "independence",
            SamplerKind::RandomWalk(c) if c.adapt && c.dr_stages > 0 => "dram",
            SamplerKind::RandomWalk(c) if c.adapt => "am",
            SamplerKind::RandomWalk(_) => "random_walk",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Chain {
    pub dim: usize,
    /// Row-major `n_steps x dim`, one row per step after the start point.
    pub samples: Vec<f64>,
    pub ln_density: Vec<f64>,
    /// Whether each step moved.
    pub accepted: Vec<bool>,
    pub burn_in: usize,
    pub sampler: SamplerKind,
    /// Times the adapted covariance needed extra jitter to factorize.
    pub jitter_events: usize,
}

impl Chain {
    pub fn len(&self) -> usize {
        self.accepted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.accepted.is_empty()
    }

    pub fn sample(&self, i: usize) -> &[f64] {
        &self.samples[i * self.dim..(i + 1) * self.dim]
    }

    /// Rows after burn-in, row-major.
    pub fn kept(&self) -> &[f64] {
        &self.samples[self.burn_in * self.dim..]
    }

    pub fn kept_len(&self) -> usize {
        self.len() - self.burn_in
    }

    /// Post-burn-in trace of coordinate `j`.
    pub fn component(&self, j: usize) -> Vec<f64> {
        self.kept().chunks_exact(self.dim).map(|r| r[j]).collect()
    }

    /// Acceptance rate after burn-in.
    pub fn acceptance_rate(&self) -> f64 {
        let kept = &self.accepted[self.burn_in..];
        if kept.is_empty() {
            return 0.0;
        }
        kept.iter().filter(|&&a| a).count() as f64 / kept.len() as f64
    }
}

/// Outcome of a single transition.
#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub state: Vec<f64>,
    pub ln_density: f64,
    pub accepted: bool,
}

fn accept<R: Rng + ?Sized>(ln_alpha: f64, rng: &mut R) -> bool {
    if ln_alpha.is_nan() {
        return false;
    }
    if ln_alpha >= 0.0 {
        return true;
    }
    let u: f64 = rng.random();
    u.ln() < ln_alpha
}

/// One independence-sampler transition with proposal `p(.; v)`:
/// accept `y'` with probability `min(1, pi(y') p(y_t) / (pi(y_t) p(y')))`.
pub fn independence_step<T: LogTarget + ?Sized, R: Rng + ?Sized>(
    state: &[f64],
    ln_state: f64,
    target: &T,
    proposal: &BiasingParams,
    rng: &mut R,
) -> Result<Step, McmcError> {
    let dist = proposal.distribution();
    let candidate = dist.sample(rng);
    let ln_candidate = target.ln_density(&candidate)?;
    if ln_candidate == f64::NEG_INFINITY {
        return Ok(Step { state: state.to_vec(), ln_density: ln_state, accepted: false });
    }
    let ln_alpha = (ln_candidate - dist.ln_pdf(&candidate)) - (ln_state - dist.ln_pdf(state));
    if accept(ln_alpha, rng) {
        Ok(Step { state: candidate, ln_density: ln_candidate, accepted: true })
    } else {
        Ok(Step { state: state.to_vec(), ln_density: ln_state, accepted: false })
    }
}

fn check_start<T: LogTarget + ?Sized>(target: &T, start: &[f64], steps: usize, burn_in: usize) -> Result<f64, McmcError> {
    if start.len() != target.dim() {
        return Err(McmcError::Dimension { expected: target.dim(), found: start.len() });
    }
    if burn_in >= steps {
        return Err(McmcError::BurnIn { burn_in, steps });
    }
    let ln = target.ln_density(start)?;
    if !ln.is_finite() {
        return Err(McmcError::BadStart);
    }
    Ok(ln)
}

pub fn run_independence<T: LogTarget + ?Sized, R: Rng + ?Sized>(
    target: &T,
    proposal: &BiasingParams,
    start: &[f64],
    steps: usize,
    burn_in: usize,
    rng: &mut R,
) -> Result<Chain, McmcError> {
    if proposal.dim() != target.dim() {
        return Err(McmcError::Dimension { expected: target.dim(), found: proposal.dim() });
    }
    let mut ln = check_start(target, start, steps, burn_in)?;
    let dim = target.dim();
    let mut state = start.to_vec();
    let mut samples = Vec::with_capacity(steps * dim);
    let mut ln_density = Vec::with_capacity(steps);
    let mut accepted = Vec::with_capacity(steps);
    for _ in 0..steps {
        let step = independence_step(&state, ln, target, proposal, rng)?;
        state = step.state;
        ln = step.ln_density;
        samples.extend_from_slice(&state);
        ln_density.push(ln);
        accepted.push(step.accepted);
    }
    Ok(Chain {
        dim,
        samples,
        ln_density,
        accepted,
        burn_in,
        sampler: SamplerKind::Independence(proposal.clone()),
        jitter_events: 0,
    })
}

/// Running mean and scatter matrix of the chain history.
struct Moments {
    n: usize,
    mean: Vec<f64>,
    scatter: Vec<f64>,
    delta: Vec<f64>,
}

impl Moments {
    fn new(dim: usize) -> Self {
        Moments { n: 0, mean: vec![0.0; dim], scatter: vec![0.0; dim * dim], delta: vec![0.0; dim] }
    }

    fn push(&mut self, x: &[f64]) {
        let d = self.mean.len();
        self.n += 1;
        let n = self.n as f64;
        for i in 0..d {
            self.delta[i] = x[i] - self.mean[i];
            self.mean[i] += self.delta[i] / n;
        }
        for i in 0..d {
            let after = x[i] - self.mean[i];
            for j in 0..d {
                self.scatter[i * d + j] += after * self.delta[j];
            }
        }
    }

    fn covariance(&self) -> Vec<f64> {
        let denom = (self.n.max(2) - 1) as f64;
        let d = self.mean.len();
        let mut c: Vec<f64> = self.scatter.iter().map(|s| s / denom).collect();
        for i in 0..d {
            for j in 0..i {
                let avg = 0.5 * (c[i * d + j] + c[j * d + i]);
                c[i * d + j] = avg;
                c[j * d + i] = avg;
            }
        }
        c
    }
}

/// Squared Mahalanobis norm `v^T C^{-1} v` from a Cholesky factor.
fn mahalanobis(l: &[f64], v: &[f64], scratch: &mut Vec<f64>) -> f64 {
    scratch.clear();
    scratch.extend_from_slice(v);
    lower_solve(l, scratch);
    scratch.iter().map(|x| x * x).sum()
}

/// Adaptive random-walk Metropolis with optional delayed rejection.
pub fn run_random_walk<T: LogTarget + ?Sized, R: Rng + ?Sized>(
    target: &T,
    config: &RandomWalkConfig,
    start: &[f64],
    steps: usize,
    burn_in: usize,
    rng: &mut R,
) -> Result<Chain, McmcError> {
    let dim = target.dim();
    if config.covariance.len() != dim * dim {
        return Err(McmcError::Dimension { expected: dim * dim, found: config.covariance.len() });
    }
    let mut ln = check_start(target, start, steps, burn_in)?;
    let mut chol = cholesky(&config.covariance, dim).ok_or(McmcError::Covariance)?;
    let scale = config.scale.unwrap_or(2.38 * 2.38 / dim as f64);
    let dr_factor = config.dr_scale.sqrt();
    let interval = config.adapt_interval.max(1);

    let mut state = start.to_vec();
    let mut samples = Vec::with_capacity(steps * dim);
    let mut ln_density = Vec::with_capacity(steps);
    let mut accepted = Vec::with_capacity(steps);
    let mut moments = Moments::new(dim);
    moments.push(&state);
    let mut jitter_events = 0;

    let mut z = vec![0.0; dim];
    let mut offset = vec![0.0; dim];
    let mut y1 = vec![0.0; dim];
    let mut y2 = vec![0.0; dim];
    let mut diff = vec![0.0; dim];
    let mut scratch = Vec::with_capacity(dim);

    for step in 1..=steps {
        for zi in z.iter_mut() {
            *zi = StandardNormal.sample(rng);
        }
        lower_mul(&chol, &z, &mut offset);
        for i in 0..dim {
            y1[i] = state[i] + offset[i];
        }
        let ln1 = target.ln_density(&y1)?;
        let ln_alpha1 = ln1 - ln;
        let mut moved = false;
        if ln1 != f64::NEG_INFINITY && accept(ln_alpha1, rng) {
            state.copy_from_slice(&y1);
            ln = ln1;
            moved = true;
        } else if config.dr_stages > 0 {
            for zi in z.iter_mut() {
                *zi = StandardNormal.sample(rng);
            }
            lower_mul(&chol, &z, &mut offset);
            for i in 0..dim {
                y2[i] = state[i] + dr_factor * offset[i];
            }
            let ln2 = target.ln_density(&y2)?;
            if ln2 != f64::NEG_INFINITY {
                // alpha_1(y2 -> y1), needed in the numerator as 1 - alpha_1.
                let ln_alpha1_rev = (ln1 - ln2).min(0.0);
                let num = 1.0 - ln_alpha1_rev.exp();
                let den = 1.0 - ln_alpha1.min(0.0).exp();
                if num > 0.0 && den > 0.0 {
                    for i in 0..dim {
                        diff[i] = y1[i] - y2[i];
                    }
                    let q_num = -0.5 * mahalanobis(&chol, &diff, &mut scratch);
                    for i in 0..dim {
                        diff[i] = y1[i] - state[i];
                    }
                    let q_den = -0.5 * mahalanobis(&chol, &diff, &mut scratch);
                    let ln_alpha2 = ln2 - ln + q_num - q_den + num.ln() - den.ln();
                    if accept(ln_alpha2, rng) {
                        state.copy_from_slice(&y2);
                        ln = ln2;
                        moved = true;
                    }
                }
            }
        }
        samples.extend_from_slice(&state);
        ln_density.push(ln);
        accepted.push(moved);
        if config.adapt {
            moments.push(&state);
            if step >= config.adapt_start && (step - config.adapt_start) % interval == 0 {
                let cov = moments.covariance();
                let mut eps = config.epsilon;
                loop {
                    let mut c: Vec<f64> = cov.iter().map(|v| scale * v).collect();
                    for i in 0..dim {
                        c[i * dim + i] += scale * eps;
                    }
                    if let Some(l) = cholesky(&c, dim) {
                        chol = l;
                        break;
                    }
                    jitter_events += 1;
                    eps = if eps > 0.0 { eps * 10.0 } else { 1e-12 };
                    if eps > 1e6 {
                        break;
                    }
                }
            }
        }
    }
    Ok(Chain {
        dim,
        samples,
        ln_density,
        accepted,
        burn_in,
        sampler: SamplerKind::RandomWalk(config.clone()),
        jitter_events,
    })
}

/// Normalized autocorrelation `rho(l)`, `l = 0..=max_lag`. A constant series
/// gives `rho(0) = 1` and zeros elsewhere.
pub fn autocorrelation(x: &[f64], max_lag: usize) -> Vec<f64> {
    let n = x.len();
    let max_lag = max_lag.min(n.saturating_sub(1));
    let mean = x.iter().sum::<f64>() / n as f64;
    let centered: Vec<f64> = x.iter().map(|v| v - mean).collect();
    let c0: f64 = centered.iter().map(|v| v * v).sum();
    let mut out = vec![0.0; max_lag + 1];
    out[0] = 1.0;
    if c0 <= 0.0 {
        return out;
    }
    for (lag, o) in out.iter_mut().enumerate().skip(1) {
        *o = lag_sum(&centered, lag) / c0;
    }
    out
}

fn lag_sum(centered: &[f64], lag: usize) -> f64 {
    centered.iter().zip(&centered[lag..]).map(|(a, b)| a * b).sum()
}

/// First lag at which the autocorrelation falls below `threshold`, if any
/// up to `max_lag`.
pub fn decorrelation_lag(x: &[f64], threshold: f64, max_lag: usize) -> Option<usize> {
    let n = x.len();
    let mean = x.iter().sum::<f64>() / n as f64;
    let centered: Vec<f64> = x.iter().map(|v| v - mean).collect();
    let c0: f64 = centered.iter().map(|v| v * v).sum();
    if c0 <= 0.0 {
        return Some(1);
    }
    (1..=max_lag.min(n.saturating_sub(1))).find(|&lag| lag_sum(&centered, lag) / c0 < threshold)
}

/// `n / (1 + 2 sum rho(l))` with Geyer's initial positive sequence
/// truncation. Zero for a constant chain.
pub fn effective_sample_size(x: &[f64]) -> f64 {
    let n = x.len();
    if n < 2 {
        return 0.0;
    }
    let mean = x.iter().sum::<f64>() / n as f64;
    let centered: Vec<f64> = x.iter().map(|v| v - mean).collect();
    let c0: f64 = centered.iter().map(|v| v * v).sum();
    if c0 <= 0.0 {
        return 0.0;
    }
    let rho = |lag: usize| if lag < n { lag_sum(&centered, lag) / c0 } else { 0.0 };
    let mut tau = -1.0;
    let mut k = 0;
    while 2 * k + 1 < n {
        let pair = rho(2 * k) + rho(2 * k + 1);
        if pair <= 0.0 {
            break;
        }
        tau += 2.0 * pair;
        k += 1;
    }
    n as f64 / tau.max(1.0 / n as f64)
}
