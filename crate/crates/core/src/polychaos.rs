//! Non-intrusive polynomial chaos surrogates.
//!
//! A surrogate is a truncated expansion `g(y) ~ sum_i a_i Psi_i(z(y))` per
//! output, in the standardized coordinates `z` of its input distribution.
//! Coefficients come from discrete projection,
//! `a_i = sum_m g(y_m) Psi_i(z_m) w_m`, over a quadrature rule expressed in
//! those standardized coordinates. Keeping the distribution inside the
//! surrogate means a surrogate built over a shifted, rescaled Gaussian is
//! still a plain Hermite expansion.

#[allow(unused_imports)] // inherent when std is linked
use num_traits::Float as _;
use alloc::vec;
use alloc::vec::Vec;
use rand::Rng;
use thiserror::Error;

use crate::distributions::Independent;
use crate::models::{ForwardModel, ModelError};
use crate::polynomials::{DimensionMismatch, MultiIndexSet, PolynomialFamily};
use crate::quadrature::QuadratureRule;

/// Input measure of a surrogate.
pub type InputDistribution = Independent;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PcError {
    #[error(transparent)]
    Dimension(#[from] DimensionMismatch),
    #[error("forward model failed at node {node:?}: {source}")]
    Model {
        node: Vec<f64>,
        #[source]
        source: ModelError,
    },
    #[error("coefficient matrix has {found} entries, expected {expected}")]
    Coefficients { expected: usize, found: usize },
    #[error("invalid input distribution")]
    Distribution,
    #[error("Monte Carlo sample size must be positive")]
    SampleSize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PcSurrogate {
    index_set: MultiIndexSet,
    families: Vec<PolynomialFamily>,
    dist: InputDistribution,
    n_outputs: usize,
    /// `coefficients[term * n_outputs + output]`.
    coefficients: Vec<f64>,
}

impl PcSurrogate {
    pub fn new(
        index_set: MultiIndexSet,
        dist: InputDistribution,
        n_outputs: usize,
        coefficients: Vec<f64>,
    ) -> Result<Self, PcError> {
        if dist.dim() != index_set.dim() {
            return Err(DimensionMismatch { expected: index_set.dim(), found: dist.dim() }.into());
        }
        if !dist.is_valid() {
            return Err(PcError::Distribution);
        }
        let expected = index_set.len() * n_outputs;
        if coefficients.len() != expected {
            return Err(PcError::Coefficients { expected, found: coefficients.len() });
        }
        let families = dist.families();
        Ok(PcSurrogate { index_set, families, dist, n_outputs, coefficients })
    }

    pub fn index_set(&self) -> &MultiIndexSet {
        &self.index_set
    }

    pub fn families(&self) -> &[PolynomialFamily] {
        &self.families
    }

    pub fn distribution(&self) -> &InputDistribution {
        &self.dist
    }

    pub fn input_dim(&self) -> usize {
        self.index_set.dim()
    }

    pub fn output_dim(&self) -> usize {
        self.n_outputs
    }

    /// Row-major `terms x outputs` coefficient matrix.
    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn coefficient(&self, term: usize, output: usize) -> f64 {
        self.coefficients[term * self.n_outputs + output]
    }

    /// Same basis and distribution with different coefficients.
    pub fn with_coefficients(&self, coefficients: Vec<f64>) -> Result<Self, PcError> {
        PcSurrogate::new(self.index_set.clone(), self.dist.clone(), self.n_outputs, coefficients)
    }

    /// `sum_i a_i^2` per output: the surrogate's second moment under its
    /// input measure.
    pub fn second_moments(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.n_outputs];
        for row in self.coefficients.chunks_exact(self.n_outputs) {
            for (o, a) in out.iter_mut().zip(row) {
                *o += a * a;
            }
        }
        out
    }

    pub fn evaluate(&self, y: &[f64]) -> Result<Vec<f64>, DimensionMismatch> {
        let mut out = vec![0.0; self.n_outputs];
        self.evaluate_into(y, &mut out, &mut EvalWorkspace::default())?;
        Ok(out)
    }

    /// Evaluates into `out` reusing `ws` between calls.
    pub fn evaluate_into(&self, y: &[f64], out: &mut [f64], ws: &mut EvalWorkspace) -> Result<(), DimensionMismatch> {
        if y.len() != self.input_dim() {
            return Err(DimensionMismatch { expected: self.input_dim(), found: y.len() });
        }
        ws.z.resize(y.len(), 0.0);
        self.dist.to_standard(y, &mut ws.z);
        ws.basis.resize(self.index_set.len(), 0.0);
        self.index_set.eval_into(&self.families, &ws.z, &mut ws.basis, &mut ws.scratch)?;
        out.iter_mut().for_each(|o| *o = 0.0);
        for (psi, row) in ws.basis.iter().zip(self.coefficients.chunks_exact(self.n_outputs)) {
            for (o, a) in out.iter_mut().zip(row) {
                *o += psi * a;
            }
        }
        Ok(())
    }
}

/// Scratch buffers for repeated surrogate evaluation.
#[derive(Debug, Default, Clone)]
pub struct EvalWorkspace {
    z: Vec<f64>,
    basis: Vec<f64>,
    scratch: Vec<f64>,
}

impl ForwardModel for PcSurrogate {
    fn input_dim(&self) -> usize {
        self.index_set.dim()
    }

    fn output_dim(&self) -> usize {
        self.n_outputs
    }

    fn evaluate(&self, y: &[f64]) -> Result<Vec<f64>, ModelError> {
        PcSurrogate::evaluate(self, y)
            .map_err(|e| ModelError::DimensionMismatch { expected: e.expected, found: e.found })
    }
}

/// A projected surrogate plus the bookkeeping of how it was built.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub surrogate: PcSurrogate,
    /// Number of forward-model calls made (one per quadrature node).
    pub model_evaluations: usize,
    /// Physical coordinates of the evaluation points, row-major.
    pub nodes: Vec<f64>,
}

/// Discrete spectral projection of `model` onto `index_set` under `dist`.
///
/// `rule` must be expressed in the standardized coordinates of `dist`
/// (Gauss-Hermite for Gaussian marginals, a `[-1, 1]` rule for uniform
/// ones). The model is evaluated exactly once per node, at the node mapped
/// to physical coordinates.
pub fn project<M: ForwardModel + ?Sized>(
    model: &M,
    dist: &InputDistribution,
    index_set: &MultiIndexSet,
    rule: &QuadratureRule,
) -> Result<Projection, PcError> {
    let dim = index_set.dim();
    for found in [dist.dim(), rule.dim(), model.input_dim()] {
        if found != dim {
            return Err(DimensionMismatch { expected: dim, found }.into());
        }
    }
    if !dist.is_valid() {
        return Err(PcError::Distribution);
    }
    let families = dist.families();
    let n_out = model.output_dim();
    let mut coefficients = vec![0.0; index_set.len() * n_out];
    let mut nodes = Vec::with_capacity(rule.len() * dim);
    let mut y = vec![0.0; dim];
    let mut basis = vec![0.0; index_set.len()];
    let mut scratch = Vec::new();
    for (z, &w) in rule.nodes().zip(rule.weights()) {
        dist.from_standard(z, &mut y);
        nodes.extend_from_slice(&y);
        let g = model.evaluate(&y).map_err(|source| PcError::Model { node: y.clone(), source })?;
        if g.len() != n_out {
            return Err(PcError::Model {
                node: y.clone(),
                source: ModelError::DimensionMismatch { expected: n_out, found: g.len() },
            });
        }
        index_set.eval_into(&families, z, &mut basis, &mut scratch)?;
        for (psi, row) in basis.iter().zip(coefficients.chunks_exact_mut(n_out)) {
            let scale = w * psi;
            for (c, gv) in row.iter_mut().zip(&g) {
                *c += scale * gv;
            }
        }
    }
    let surrogate = PcSurrogate::new(index_set.clone(), dist.clone(), n_out, coefficients)?;
    Ok(Projection { surrogate, model_evaluations: rule.len(), nodes })
}

/// Monte Carlo estimate of `||G~ - G||_{L^2(dist)}`.
#[derive(Debug, Clone, PartialEq)]
pub struct L2Error {
    /// Root-mean-square error per output.
    pub per_output: Vec<f64>,
    /// `sqrt(E ||G~ - G||^2)` over all outputs.
    pub aggregate: f64,
    /// Delta-method standard error of `aggregate`.
    pub std_error: f64,
}

pub fn l2_error<M: ForwardModel + ?Sized, R: Rng + ?Sized>(
    surrogate: &PcSurrogate,
    model: &M,
    dist: &InputDistribution,
    n_mc: usize,
    rng: &mut R,
) -> Result<L2Error, PcError> {
    if n_mc == 0 {
        return Err(PcError::SampleSize);
    }
    let n_out = surrogate.output_dim();
    let mut per_output = vec![0.0; n_out];
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    let mut y = vec![0.0; dist.dim()];
    let mut approx = vec![0.0; n_out];
    let mut ws = EvalWorkspace::default();
    for _ in 0..n_mc {
        dist.sample_into(rng, &mut y);
        let g = model.evaluate(&y).map_err(|source| PcError::Model { node: y.clone(), source })?;
        surrogate.evaluate_into(&y, &mut approx, &mut ws)?;
        let mut total = 0.0;
        for ((acc, a), b) in per_output.iter_mut().zip(&approx).zip(&g) {
            let e2 = (a - b) * (a - b);
            *acc += e2;
            total += e2;
        }
        sum += total;
        sum_sq += total * total;
    }
    let n = n_mc as f64;
    per_output.iter_mut().for_each(|v| *v = (*v / n).sqrt());
    let mean = sum / n;
    let var = (sum_sq / n - mean * mean).max(0.0);
    let aggregate = mean.sqrt();
    let se_mean = (var / n).sqrt();
    let std_error = if aggregate > 0.0 { se_mean / (2.0 * aggregate) } else { 0.0 };
    Ok(L2Error { per_output, aggregate, std_error })
}
