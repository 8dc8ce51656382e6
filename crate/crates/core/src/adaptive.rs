//! Tempered cross-entropy construction of a Gaussian biasing distribution
//! and a local PC surrogate.
//!
//! Each iteration builds a surrogate over the current biasing distribution
//! `p(.; v_k)`, draws `M` samples from it, picks the next tempering level
//! `lambda_{k+1}` from the elite quantile of surrogate likelihoods, and
//! solves the weighted maximum-likelihood problem for `v_{k+1}` in closed
//! form. The loop stops after the update made at `lambda = 1`; a final
//! surrogate is then built over `p(.; v_inf)`.
//!
//! Everything is done in log space. Weights `L(G~(y); lambda) pi(y) / p(y; v_k)`
//! are exponentiated only after subtracting the batch maximum.

#[allow(unused_imports)] // inherent when std is linked
use num_traits::Float as _;
use alloc::vec;
use alloc::vec::Vec;
use rand::Rng;
use thiserror::Error;

use crate::bayes::{temper, BayesError, GaussianLikelihood, Prior};
use crate::distributions::Independent;
use crate::models::{ForwardModel, ModelError};
use crate::polychaos::{project, EvalWorkspace, PcError, PcSurrogate};
use crate::polynomials::MultiIndexSet;
use crate::quadrature::{gauss_rule, smolyak_rule, tensor_rule, OneDimRule, QuadratureError, QuadratureRule, SparseGridSpec};
use crate::stats::weights_ess;

/// Minimum Kish effective sample size accepted by a parameter update.
pub const MIN_UPDATE_ESS: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AdaptiveError {
    #[error("invalid configuration: {0}")]
    Config(&'static str),
    #[error("biasing distribution missed the posterior: every elite likelihood is zero")]
    MissedPosterior,
    #[error("degenerate batch: effective sample size {ess:.3} is below the minimum")]
    Degenerate { ess: f64 },
    #[error("no convergence to lambda = 1 within {0} iterations")]
    MaxIterations(usize),
    #[error(transparent)]
    Surrogate(#[from] PcError),
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Bayes(#[from] BayesError),
}

/// Uncorrelated Gaussian biasing parameters `v = (mu, sigma)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BiasingParams {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl BiasingParams {
    pub fn new(mean: Vec<f64>, std: Vec<f64>) -> Result<Self, AdaptiveError> {
        if mean.len() != std.len() || mean.is_empty() {
            return Err(AdaptiveError::Config("biasing mean and std must have the same nonzero length"));
        }
        if std.iter().any(|s| !(s.is_finite() && *s > 0.0)) || mean.iter().any(|m| !m.is_finite()) {
            return Err(AdaptiveError::Config("biasing std must be positive and all parameters finite"));
        }
        Ok(BiasingParams { mean, std })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn distribution(&self) -> Independent {
        Independent::gaussian(&self.mean, &self.std)
    }
}

/// How the minimum tempering step `delta` is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepRule {
    Fixed(f64),
    /// `delta = f (lambda_1 - 1)` with `lambda_1` the first finite level.
    FractionOfFirst(f64),
}

/// Quadrature used to project a surrogate over a Gaussian biasing
/// distribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridChoice {
    /// Full tensor Gauss-Hermite rule with `points` per dimension.
    Tensor { points: usize },
    /// Isotropic Smolyak grid of the given level.
    Smolyak { level: usize, rule: OneDimRule },
}

impl GridChoice {
    pub fn build(&self, dim: usize) -> Result<QuadratureRule, QuadratureError> {
        match *self {
            GridChoice::Tensor { points } => {
                let g = gauss_rule(crate::polynomials::PolynomialFamily::HermiteProbabilist, points)?;
                tensor_rule(&vec![g; dim])
            }
            GridChoice::Smolyak { level, rule } => smolyak_rule(&SparseGridSpec { dim, level, rule }),
        }
    }
}

/// Reference scale for the likelihood level `gamma`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LikelihoodLevel {
    /// Likelihoods are divided by the batch maximum, so `gamma` is relative.
    #[default]
    BatchMax,
    /// `gamma` is compared with the Gaussian kernel
    /// `exp(-0.5 sum ((d - g) / sigma)^2)`, i.e. the likelihood without its
    /// normalizing constant.
    GaussianKernel,
}

/// Total-order truncation and projection grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SurrogateSpec {
    pub order: u32,
    pub grid: GridChoice,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CeConfig {
    /// Elite fraction `rho`.
    pub rho: f64,
    /// Relative likelihood level `gamma` in `(0, 1)`.
    pub gamma: f64,
    pub step: StepRule,
    /// Importance-sampling batch size `M`.
    pub samples: usize,
    pub max_iterations: usize,
    pub surrogate: SurrogateSpec,
    pub final_surrogate: SurrogateSpec,
    pub initial: BiasingParams,
    /// Extra updates at `lambda = 1` after the first one.
    pub extra_final_passes: usize,
    pub sigma_min: f64,
    pub level: LikelihoodLevel,
    /// Updates with a smaller Kish ESS are rejected as degenerate.
    pub min_ess: f64,
}

impl CeConfig {
    pub fn validate(&self) -> Result<(), AdaptiveError> {
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return Err(AdaptiveError::Config("rho must lie in (0, 1)"));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(AdaptiveError::Config("gamma must lie in (0, 1)"));
        }
        match self.step {
            StepRule::Fixed(d) | StepRule::FractionOfFirst(d) if d > 0.0 && d.is_finite() => {}
            _ => return Err(AdaptiveError::Config("step size must be positive")),
        }
        if self.samples < 100 {
            return Err(AdaptiveError::Config("need at least 100 importance samples"));
        }
        if self.max_iterations == 0 {
            return Err(AdaptiveError::Config("max_iterations must be positive"));
        }
        if !(self.sigma_min > 0.0) {
            return Err(AdaptiveError::Config("sigma_min must be positive"));
        }
        if !(self.min_ess >= 1.0) {
            return Err(AdaptiveError::Config("min_ess must be at least 1"));
        }
        BiasingParams::new(self.initial.mean.clone(), self.initial.std.clone())?;
        Ok(())
    }
}

/// Importance-sampling batch drawn from `p(.; v_k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub dim: usize,
    /// Row-major `M x dim`.
    pub samples: Vec<f64>,
    /// `ln l_k(y) = ln pi(y) - ln p(y; v_k)`; `-inf` outside the prior support.
    pub ln_weights: Vec<f64>,
    /// Untempered surrogate log-likelihood `ln L(G~_k(y))`.
    pub ln_likelihood: Vec<f64>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.ln_weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ln_weights.is_empty()
    }

    pub fn sample(&self, m: usize) -> &[f64] {
        &self.samples[m * self.dim..(m + 1) * self.dim]
    }

    /// Combined log-weights `ln L^(1/lambda) + ln l`, shifted so the largest
    /// is zero, plus the shift.
    fn shifted_log_weights(&self, lambda: f64) -> (Vec<f64>, f64) {
        // Likelihoods are normalized to a maximum of one before tempering so
        // a constant factor in L cancels before any other arithmetic.
        let ll_max = self.ln_likelihood.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let ll_max = if ll_max.is_finite() { ll_max } else { 0.0 };
        let mut lw: Vec<f64> = self
            .ln_likelihood
            .iter()
            .zip(&self.ln_weights)
            .map(|(&ll, &lw)| if lw == f64::NEG_INFINITY { lw } else { temper(ll - ll_max, lambda) + lw })
            .collect();
        let shift = lw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !shift.is_finite() {
            return (lw, shift);
        }
        lw.iter_mut().for_each(|v| *v -= shift);
        (lw, shift + temper(ll_max, lambda))
    }

    /// Normalized-to-max weights `L^(1/lambda) l`, with their log shift.
    pub fn weights(&self, lambda: f64) -> (Vec<f64>, f64) {
        let (lw, shift) = self.shifted_log_weights(lambda);
        (lw.into_iter().map(f64::exp).collect(), shift)
    }
}

/// Draws `m` samples from `v` and scores them with the surrogate.
pub fn draw_batch<M: ForwardModel + ?Sized, R: Rng + ?Sized>(
    surrogate: &M,
    prior: &Prior,
    lik: &GaussianLikelihood,
    v: &BiasingParams,
    m: usize,
    rng: &mut R,
) -> Result<Batch, AdaptiveError> {
    let dist = v.distribution();
    let dim = v.dim();
    let mut samples = vec![0.0; m * dim];
    let mut ln_weights = Vec::with_capacity(m);
    let mut ln_likelihood = Vec::with_capacity(m);
    for row in samples.chunks_exact_mut(dim) {
        dist.sample_into(rng, row);
        let ln_prior = prior.ln_pdf(row);
        ln_weights.push(if ln_prior == f64::NEG_INFINITY { ln_prior } else { ln_prior - dist.ln_pdf(row) });
        let g = surrogate.evaluate(row)?;
        ln_likelihood.push(lik.log_likelihood(&g));
    }
    Ok(Batch { dim, samples, ln_weights, ln_likelihood })
}

/// Surrogate-scored batch using a reusable evaluation workspace.
pub fn draw_batch_pc<R: Rng + ?Sized>(
    surrogate: &PcSurrogate,
    prior: &Prior,
    lik: &GaussianLikelihood,
    v: &BiasingParams,
    m: usize,
    rng: &mut R,
) -> Result<Batch, AdaptiveError> {
    let dist = v.distribution();
    let dim = v.dim();
    let mut samples = vec![0.0; m * dim];
    let mut ln_weights = Vec::with_capacity(m);
    let mut ln_likelihood = Vec::with_capacity(m);
    let mut g = vec![0.0; surrogate.output_dim()];
    let mut ws = EvalWorkspace::default();
    for row in samples.chunks_exact_mut(dim) {
        dist.sample_into(rng, row);
        let ln_prior = prior.ln_pdf(row);
        ln_weights.push(if ln_prior == f64::NEG_INFINITY { ln_prior } else { ln_prior - dist.ln_pdf(row) });
        surrogate.evaluate_into(row, &mut g, &mut ws).map_err(PcError::from)?;
        ln_likelihood.push(lik.log_likelihood(&g));
    }
    Ok(Batch { dim, samples, ln_weights, ln_likelihood })
}

/// `D^(v) = exp(ln_scale) * scaled`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveEstimate {
    pub scaled: f64,
    pub ln_scale: f64,
}

impl ObjectiveEstimate {
    pub fn value(&self) -> f64 {
        self.scaled * self.ln_scale.exp()
    }
}

/// Importance-sampling estimate of the cross-entropy objective
/// `(1/M) sum_m L(G~(y_m); lambda) ln p(y_m; v) l(y_m)`.
pub fn objective_hat(batch: &Batch, v: &BiasingParams, lambda: f64) -> Result<ObjectiveEstimate, AdaptiveError> {
    let (w, shift) = batch.weights(lambda);
    if !shift.is_finite() {
        return Err(AdaptiveError::Degenerate { ess: 0.0 });
    }
    let dist = v.distribution();
    let mut acc = 0.0;
    for (m, &wm) in w.iter().enumerate() {
        if wm > 0.0 {
            acc += wm * dist.ln_pdf(batch.sample(m));
        }
    }
    Ok(ObjectiveEstimate { scaled: acc / batch.len() as f64, ln_scale: shift })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LambdaUpdate {
    pub lambda: f64,
    /// Unclamped quantile solution.
    pub lambda_star: f64,
    /// `ln L_rho` after normalizing the batch maximum to one.
    pub ln_elite_level: f64,
    pub clamped: bool,
    pub floored: bool,
}

/// Next tempering level from untempered log-likelihoods, normalized to the
/// batch maximum. `delta` is ignored while `lambda_k` is infinite.
pub fn update_lambda(
    ln_likelihood: &[f64],
    lambda_k: f64,
    rho: f64,
    gamma: f64,
    delta: f64,
) -> Result<LambdaUpdate, AdaptiveError> {
    let max = ln_likelihood.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !ln_likelihood.is_empty() && !max.is_finite() {
        return Err(AdaptiveError::MissedPosterior);
    }
    solve_lambda(ln_likelihood, max, lambda_k, rho, gamma, delta)
}

/// As [`update_lambda`] with `gamma` an absolute level for `exp(ln_values)`.
/// An elite level at or above one admits every `lambda`, so the floor at
/// one applies.
pub fn update_lambda_absolute(
    ln_values: &[f64],
    lambda_k: f64,
    rho: f64,
    gamma: f64,
    delta: f64,
) -> Result<LambdaUpdate, AdaptiveError> {
    solve_lambda(ln_values, 0.0, lambda_k, rho, gamma, delta)
}

fn solve_lambda(
    ln_values: &[f64],
    reference: f64,
    lambda_k: f64,
    rho: f64,
    gamma: f64,
    delta: f64,
) -> Result<LambdaUpdate, AdaptiveError> {
    if ln_values.is_empty() {
        return Err(AdaptiveError::Config("empty likelihood batch"));
    }
    if !(gamma > 0.0 && gamma < 1.0) || !(rho > 0.0 && rho < 1.0) {
        return Err(AdaptiveError::Config("rho and gamma must lie in (0, 1)"));
    }
    let mut sorted = ln_values.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let m = sorted.len();
    let index = ((1.0 - rho) * m as f64).ceil().clamp(1.0, m as f64) as usize;
    let ln_elite_level = sorted[index - 1] - reference;
    if ln_elite_level == f64::NEG_INFINITY || ln_elite_level.is_nan() {
        return Err(AdaptiveError::MissedPosterior);
    }
    let lambda_star = if ln_elite_level >= 0.0 { 1.0 } else { ln_elite_level / gamma.ln() };
    let mut lambda = lambda_star;
    let mut clamped = false;
    if lambda_k.is_finite() && lambda > lambda_k - delta {
        lambda = lambda_k - delta;
        clamped = true;
    }
    let mut floored = false;
    if lambda < 1.0 {
        lambda = 1.0;
        floored = true;
    }
    Ok(LambdaUpdate { lambda, lambda_star, ln_elite_level, clamped, floored })
}

/// Closed-form maximizer of [`objective_hat`] over uncorrelated Gaussians:
/// weighted means and weighted (population) standard deviations, with
/// `sigma` floored at `sigma_min`. Returns the parameters and the Kish ESS
/// of the weights.
pub fn update_params(batch: &Batch, lambda: f64, sigma_min: f64) -> Result<(BiasingParams, f64), AdaptiveError> {
    update_params_with(batch, lambda, sigma_min, MIN_UPDATE_ESS)
}

/// As [`update_params`] with a caller-chosen ESS floor.
pub fn update_params_with(
    batch: &Batch,
    lambda: f64,
    sigma_min: f64,
    min_ess: f64,
) -> Result<(BiasingParams, f64), AdaptiveError> {
    let (w, shift) = batch.weights(lambda);
    if !shift.is_finite() {
        return Err(AdaptiveError::Degenerate { ess: 0.0 });
    }
    let ess = weights_ess(&w);
    if ess < min_ess {
        return Err(AdaptiveError::Degenerate { ess });
    }
    let dim = batch.dim;
    let total: f64 = w.iter().sum();
    let mut mean = vec![0.0; dim];
    for (m, &wm) in w.iter().enumerate() {
        if wm > 0.0 {
            for (acc, y) in mean.iter_mut().zip(batch.sample(m)) {
                *acc += wm * y;
            }
        }
    }
    mean.iter_mut().for_each(|v| *v /= total);
    let mut var = vec![0.0; dim];
    for (m, &wm) in w.iter().enumerate() {
        if wm > 0.0 {
            for ((acc, y), mu) in var.iter_mut().zip(batch.sample(m)).zip(&mean) {
                *acc += wm * (y - mu) * (y - mu);
            }
        }
    }
    let std = var.iter().map(|v| (v / total).sqrt().max(sigma_min)).collect();
    Ok((BiasingParams { mean, std }, ess))
}

/// One row of the adaptation trace.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub iteration: usize,
    /// Level used for the update made in this iteration.
    pub lambda: f64,
    /// Parameters produced by the update.
    pub params: BiasingParams,
    pub ess: f64,
    /// Cumulative true-model evaluations after this iteration's surrogate.
    pub model_evaluations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CeOutcome {
    pub final_params: BiasingParams,
    pub final_surrogate: PcSurrogate,
    pub trace: Vec<TraceRow>,
    /// Total true-model evaluations, including the final surrogate.
    pub model_evaluations: usize,
    /// Physical evaluation points of every surrogate built, in order; the
    /// last entry belongs to the final surrogate.
    pub evaluation_nodes: Vec<Vec<f64>>,
    /// The step size in effect once `lambda_1` was known.
    pub delta: f64,
}

impl CeOutcome {
    pub fn iterations(&self) -> usize {
        self.trace.len()
    }
}

/// Runs the adaptive loop to `lambda = 1` and builds the final surrogate.
pub fn run<M: ForwardModel + ?Sized, R: Rng + ?Sized>(
    model: &M,
    prior: &Prior,
    lik: &GaussianLikelihood,
    config: &CeConfig,
    rng: &mut R,
) -> Result<CeOutcome, AdaptiveError> {
    config.validate()?;
    let dim = config.initial.dim();
    if prior.dim() != dim || model.input_dim() != dim {
        return Err(AdaptiveError::Config("prior, model and biasing dimensions differ"));
    }
    let set = MultiIndexSet::total_order(dim, config.surrogate.order);
    let rule = config.surrogate.grid.build(dim)?;

    let mut v = config.initial.clone();
    let mut lambda = f64::INFINITY;
    let mut delta = match config.step {
        StepRule::Fixed(d) => d,
        StepRule::FractionOfFirst(_) => f64::NAN,
    };
    let mut evaluations = 0;
    let mut trace = Vec::new();
    let mut evaluation_nodes = Vec::new();
    let mut passes_at_one = 0;
    loop {
        if trace.len() >= config.max_iterations {
            return Err(AdaptiveError::MaxIterations(config.max_iterations));
        }
        let projection = project(model, &v.distribution(), &set, &rule)?;
        evaluations += projection.model_evaluations;
        evaluation_nodes.push(projection.nodes);
        let batch = draw_batch_pc(&projection.surrogate, prior, lik, &v, config.samples, rng)?;
        let next = if lambda == 1.0 {
            1.0
        } else {
            let upd = match config.level {
                LikelihoodLevel::BatchMax => update_lambda(&batch.ln_likelihood, lambda, config.rho, config.gamma, delta)?,
                LikelihoodLevel::GaussianKernel => {
                    let kernel: Vec<f64> = batch.ln_likelihood.iter().map(|l| l - lik.ln_normalizer()).collect();
                    update_lambda_absolute(&kernel, lambda, config.rho, config.gamma, delta)?
                }
            };
            if lambda.is_infinite() {
                if let StepRule::FractionOfFirst(f) = config.step {
                    delta = f * (upd.lambda - 1.0);
                }
            }
            upd.lambda
        };
        let (params, ess) = update_params_with(&batch, next, config.sigma_min, config.min_ess)?;
        trace.push(TraceRow {
            iteration: trace.len() + 1,
            lambda: next,
            params: params.clone(),
            ess,
            model_evaluations: evaluations,
        });
        v = params;
        lambda = next;
        if lambda == 1.0 {
            if passes_at_one >= config.extra_final_passes {
                break;
            }
            passes_at_one += 1;
        }
    }

    let final_set = MultiIndexSet::total_order(dim, config.final_surrogate.order);
    let final_rule = config.final_surrogate.grid.build(dim)?;
    let projection = project(model, &v.distribution(), &final_set, &final_rule)?;
    evaluations += projection.model_evaluations;
    evaluation_nodes.push(projection.nodes);
    Ok(CeOutcome {
        final_params: v,
        final_surrogate: projection.surrogate,
        trace,
        model_evaluations: evaluations,
        evaluation_nodes,
        delta: if delta.is_nan() { 0.0 } else { delta },
    })
}

/// Setting for an empirical check of `D^_N(v) -> D(v)`.
#[derive(Debug, Clone)]
pub struct ConvergenceSetup<'a, M: ?Sized> {
    pub model: &'a M,
    pub prior: &'a Prior,
    pub likelihood: &'a GaussianLikelihood,
    /// Sampling and surrogate measure.
    pub biasing: BiasingParams,
    pub lambda: f64,
    pub grid: GridChoice,
    /// Independent repetitions per `(M, N, v)` cell.
    pub replicates: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceRow {
    pub samples: usize,
    pub order: u32,
    pub point: usize,
    pub exact: f64,
    /// Mean of the replicate estimates.
    pub estimate: f64,
    /// Root-mean-square error over replicates.
    pub rms_error: f64,
}

/// Tabulates `|D^_N(v) - D(v)|` over sample sizes `M`, orders `N` and test
/// points `v`, with `exact(v)` supplied by the caller.
pub fn empirical_convergence_check<M, R, F>(
    setup: &ConvergenceSetup<'_, M>,
    points: &[BiasingParams],
    sample_sizes: &[usize],
    orders: &[u32],
    exact: F,
    rng: &mut R,
) -> Result<Vec<ConvergenceRow>, AdaptiveError>
where
    M: ForwardModel + ?Sized,
    R: Rng + ?Sized,
    F: Fn(&BiasingParams) -> f64,
{
    let dim = setup.biasing.dim();
    let dist = setup.biasing.distribution();
    let rule = setup.grid.build(dim)?;
    let reps = setup.replicates.max(1);
    let mut rows = Vec::new();
    for &order in orders {
        let set = MultiIndexSet::total_order(dim, order);
        let surrogate = project(setup.model, &dist, &set, &rule)?.surrogate;
        for &m in sample_sizes {
            let mut estimates = vec![Vec::with_capacity(reps); points.len()];
            for _ in 0..reps {
                let batch = draw_batch_pc(&surrogate, setup.prior, setup.likelihood, &setup.biasing, m, rng)?;
                for (p, v) in points.iter().enumerate() {
                    estimates[p].push(objective_hat(&batch, v, setup.lambda)?.value());
                }
            }
            for (p, v) in points.iter().enumerate() {
                let d = exact(v);
                let est = &estimates[p];
                let mean = est.iter().sum::<f64>() / est.len() as f64;
                let mse = est.iter().map(|e| (e - d) * (e - d)).sum::<f64>() / est.len() as f64;
                rows.push(ConvergenceRow { samples: m, order, point: p, exact: d, estimate: mean, rms_error: mse.sqrt() });
            }
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn batch_1d(ys: &[f64], ln_l: &[f64]) -> Batch {
        Batch {
            dim: 1,
            samples: ys.to_vec(),
            ln_weights: vec![0.0; ys.len()],
            ln_likelihood: ln_l.to_vec(),
        }
    }

    #[test]
    fn lambda_fixed_point() {
        let gamma: f64 = 1e-3;
        let mut ln_l = vec![-50.0; 100];
        ln_l[99] = 0.0;
        for v in ln_l.iter_mut().skip(90).take(9) {
            *v = gamma.ln();
        }
        let upd = update_lambda(&ln_l, f64::INFINITY, 0.05, gamma, 0.0).unwrap();
        assert_relative_eq!(upd.lambda_star, 1.0, epsilon = 1e-12);
        assert_eq!(upd.lambda, 1.0);
    }

    #[test]
    fn lambda_arithmetic() {
        let mut ln_l = vec![-500.0; 100];
        for v in ln_l.iter_mut().skip(94) {
            *v = -100.0;
        }
        ln_l[99] = 0.0;
        let upd = update_lambda(&ln_l, f64::INFINITY, 0.05, 1e-3, 0.0).unwrap();
        assert_relative_eq!(upd.lambda_star, 100.0 / 1000f64.ln(), epsilon = 1e-12);
        assert_relative_eq!(upd.lambda, 14.476482730108394, epsilon = 1e-12);
        assert!(!upd.clamped && !upd.floored);

        let clamped = update_lambda(&ln_l, 15.0, 0.05, 1e-3, 1.0).unwrap();
        assert!(clamped.clamped);
        assert_relative_eq!(clamped.lambda, 14.0);
    }

    #[test]
    fn lambda_floor_rule() {
        // lambda* = 1.1 against lambda_k = 1.2 and delta = 0.5.
        let level = -1.1 * 1000f64.ln();
        let mut ln_l = vec![level - 10.0; 20];
        ln_l[19] = 0.0;
        ln_l[18] = level;
        let upd = update_lambda(&ln_l, 1.2, 0.05, 1e-3, 0.5).unwrap();
        assert_relative_eq!(upd.lambda_star, 1.1, epsilon = 1e-12);
        assert_eq!(upd.lambda, 1.0);
        assert!(upd.clamped && upd.floored);
    }

    #[test]
    fn absolute_level_is_not_rescaled() {
        // Shifting every value by a constant moves lambda* for the absolute
        // level but not for the batch-max level.
        let ln_l: Vec<f64> = (0..100).map(|i| -200.0 + 2.0 * i as f64).collect();
        let rel = update_lambda(&ln_l, f64::INFINITY, 0.05, 1e-3, 0.0).unwrap();
        let shifted: Vec<f64> = ln_l.iter().map(|v| v - 7.0).collect();
        assert_eq!(update_lambda(&shifted, f64::INFINITY, 0.05, 1e-3, 0.0).unwrap().lambda_star.to_bits(), rel.lambda_star.to_bits());
        let abs = update_lambda_absolute(&shifted, f64::INFINITY, 0.05, 1e-3, 0.0).unwrap();
        assert_relative_eq!(abs.ln_elite_level, -12.0 - 7.0, epsilon = 1e-12);
        assert_relative_eq!(abs.lambda_star, 19.0 / 1000f64.ln(), epsilon = 1e-12);

        let above: Vec<f64> = ln_l.iter().map(|v| v + 30.0).collect();
        let upd = update_lambda_absolute(&above, f64::INFINITY, 0.05, 1e-3, 0.0).unwrap();
        assert_eq!((upd.lambda_star, upd.lambda), (1.0, 1.0));
    }

    #[test]
    fn ess_floor_is_configurable() {
        let mut ln_l = vec![-1e4; 50];
        ln_l[3] = 0.0;
        ln_l[7] = -0.5;
        let ys: Vec<f64> = (0..50).map(|i| i as f64).collect();
        let b = batch_1d(&ys, &ln_l);
        assert!(update_params(&b, 1.0, 1e-6).is_err());
        let (v, ess) = update_params_with(&b, 1.0, 1e-6, 1.0).unwrap();
        assert!(ess > 1.0 && ess < 2.0);
        assert!(v.mean[0] > 3.0 && v.mean[0] < 7.0);
    }

    #[test]
    fn zero_elite_likelihood_aborts() {
        let mut ln_l = vec![f64::NEG_INFINITY; 100];
        ln_l[0] = -3.0;
        assert_eq!(update_lambda(&ln_l, f64::INFINITY, 0.05, 1e-3, 0.0), Err(AdaptiveError::MissedPosterior));
    }

    #[test]
    fn hand_computed_weighted_moments() {
        // Ten copies of y = {0, 2} with weights {1, 3}.
        let b = Batch {
            dim: 1,
            samples: [0.0, 2.0].repeat(10),
            ln_weights: [0.0, 3f64.ln()].repeat(10),
            ln_likelihood: vec![0.0; 20],
        };
        let (v, _) = update_params(&b, 1.0, 1e-6).unwrap();
        assert_relative_eq!(v.mean[0], 1.5, epsilon = 1e-14);
        assert_relative_eq!(v.std[0], 0.75f64.sqrt(), epsilon = 1e-14);
    }

    #[test]
    fn uniform_weights_give_sample_moments() {
        let ys: Vec<f64> = (0..50).map(|i| (i as f64 * 0.61).sin()).collect();
        let (v, ess) = update_params(&batch_1d(&ys, &[-2.0; 50]), 3.0, 1e-6).unwrap();
        let mean = ys.iter().sum::<f64>() / 50.0;
        let var = ys.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / 50.0;
        assert_relative_eq!(v.mean[0], mean, epsilon = 1e-14);
        assert_relative_eq!(v.std[0], var.sqrt(), epsilon = 1e-14);
        assert_relative_eq!(ess, 50.0, epsilon = 1e-12);
    }

    #[test]
    fn degenerate_batch_is_flagged() {
        let mut ln_l = vec![-1e4; 50];
        ln_l[3] = 0.0;
        let ys: Vec<f64> = (0..50).map(|i| i as f64).collect();
        assert!(matches!(update_params(&batch_1d(&ys, &ln_l), 1.0, 1e-6), Err(AdaptiveError::Degenerate { .. })));
        let b = Batch { ln_weights: vec![f64::NEG_INFINITY; 50], ..batch_1d(&ys, &ln_l) };
        assert!(matches!(objective_hat(&b, &BiasingParams::new(vec![0.0], vec![1.0]).unwrap(), 1.0), Err(AdaptiveError::Degenerate { .. })));
    }

    #[test]
    fn sigma_floor() {
        let (v, _) = update_params(&batch_1d(&[0.5; 20], &[0.0; 20]), 1.0, 1e-6).unwrap();
        assert_eq!(v.std[0], 1e-6);
    }

    #[test]
    fn config_validation() {
        let cfg = CeConfig {
            rho: 0.05,
            gamma: 1e-3,
            step: StepRule::FractionOfFirst(0.1),
            samples: 1000,
            max_iterations: 20,
            surrogate: SurrogateSpec { order: 2, grid: GridChoice::Tensor { points: 3 } },
            final_surrogate: SurrogateSpec { order: 2, grid: GridChoice::Tensor { points: 3 } },
            initial: BiasingParams::new(vec![0.0], vec![1.0]).unwrap(),
            extra_final_passes: 0,
            sigma_min: 1e-6,
            level: LikelihoodLevel::BatchMax,
            min_ess: MIN_UPDATE_ESS,
        };
        assert!(cfg.validate().is_ok());
        assert!(CeConfig { gamma: 2.0, ..cfg.clone() }.validate().is_err());
        assert!(CeConfig { rho: 1.0, ..cfg.clone() }.validate().is_err());
        assert!(CeConfig { samples: 10, ..cfg.clone() }.validate().is_err());
        assert!(BiasingParams::new(vec![0.0], vec![0.0]).is_err());
    }
}
