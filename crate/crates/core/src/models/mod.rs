//! Forward models `G: R^n_y -> R^n_d`.
//!
//! [`ForwardModel`] is the only interface the surrogate and inference layers
//! see. Concrete models are the 2D contaminant-source diffusion problem
//! ([`SourceModel`]) and the 1D nonlinear inverse heat-conduction problem
//! ([`HeatModel`]); [`FnModel`] wraps closures for toys and tests.
//!
//! Every model carries an [`EvalCounter`] that increments once per
//! `evaluate` call, including failed ones. Counters are atomic so shared
//! references may be evaluated from several threads.

mod heat;
mod source;

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::sync::atomic::{AtomicU64, Ordering};
use thiserror::Error;

pub use heat::{flux_basis, flux_eval, Conductivity, HeatModel, HeatModelConfig, HeatTrajectory};
pub use source::{SourceModel, SourceModelConfig};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("input dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("nonlinear solver diverged at t = {time} after {iterations} iterations (mesh nodes {mesh_nodes}, dt {dt})")]
    SolverDivergence { time: f64, iterations: usize, mesh_nodes: usize, dt: f64 },
    #[error("invalid model configuration: {0}")]
    InvalidConfig(&'static str),
    #[error("model produced a non-finite output")]
    NonFinite,
    #[error("{0}")]
    Failed(String),
}

/// Deterministic map from parameters to predicted observables.
pub trait ForwardModel {
    fn input_dim(&self) -> usize;

    fn output_dim(&self) -> usize;

    fn evaluate(&self, y: &[f64]) -> Result<Vec<f64>, ModelError>;

    /// Number of `evaluate` calls so far, if the model tracks them.
    fn evaluation_count(&self) -> u64 {
        0
    }
}

impl<M: ForwardModel + ?Sized> ForwardModel for &M {
    fn input_dim(&self) -> usize {
        (**self).input_dim()
    }
    fn output_dim(&self) -> usize {
        (**self).output_dim()
    }
    fn evaluate(&self, y: &[f64]) -> Result<Vec<f64>, ModelError> {
        (**self).evaluate(y)
    }
    fn evaluation_count(&self) -> u64 {
        (**self).evaluation_count()
    }
}

impl<M: ForwardModel + ?Sized> ForwardModel for alloc::boxed::Box<M> {
    fn input_dim(&self) -> usize {
        (**self).input_dim()
    }
    fn output_dim(&self) -> usize {
        (**self).output_dim()
    }
    fn evaluate(&self, y: &[f64]) -> Result<Vec<f64>, ModelError> {
        (**self).evaluate(y)
    }
    fn evaluation_count(&self) -> u64 {
        (**self).evaluation_count()
    }
}

/// Thread-safe evaluation counter.
#[derive(Debug, Default)]
pub struct EvalCounter(AtomicU64);

impl EvalCounter {
    pub fn new() -> Self {
        EvalCounter(AtomicU64::new(0))
    }

    pub fn bump(&self) {
        self.0.fetch_add(1, Ordering::Relaxed);
    }

    pub fn get(&self) -> u64 {
        self.0.load(Ordering::Relaxed)
    }

    pub fn reset(&self) {
        self.0.store(0, Ordering::Relaxed);
    }
}

impl Clone for EvalCounter {
    fn clone(&self) -> Self {
        EvalCounter(AtomicU64::new(self.get()))
    }
}

pub(crate) fn check_dim(expected: usize, y: &[f64]) -> Result<(), ModelError> {
    if y.len() == expected {
        Ok(())
    } else {
        Err(ModelError::DimensionMismatch { expected, found: y.len() })
    }
}

/// A forward model backed by a closure.
pub struct FnModel<F> {
    input_dim: usize,
    output_dim: usize,
    f: F,
    counter: EvalCounter,
}

impl<F> FnModel<F>
where
    F: Fn(&[f64]) -> Result<Vec<f64>, ModelError>,
{
    pub fn new(input_dim: usize, output_dim: usize, f: F) -> Self {
        FnModel { input_dim, output_dim, f, counter: EvalCounter::new() }
    }
}

impl<F> fmt::Debug for FnModel<F> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FnModel")
            .field("input_dim", &self.input_dim)
            .field("output_dim", &self.output_dim)
            .field("evaluations", &self.counter.get())
            .finish()
    }
}

impl<F> ForwardModel for FnModel<F>
where
    F: Fn(&[f64]) -> Result<Vec<f64>, ModelError>,
{
    fn input_dim(&self) -> usize {
        self.input_dim
    }

    fn output_dim(&self) -> usize {
        self.output_dim
    }

    fn evaluate(&self, y: &[f64]) -> Result<Vec<f64>, ModelError> {
        self.counter.bump();
        check_dim(self.input_dim, y)?;
        let out = (self.f)(y)?;
        if out.len() != self.output_dim {
            return Err(ModelError::Failed(alloc::format!(
                "closure returned {} outputs, expected {}",
                out.len(),
                self.output_dim
            )));
        }
        Ok(out)
    }

    fn evaluation_count(&self) -> u64 {
        self.counter.get()
    }
}

/// Builds a closure model that cannot fail.
pub fn fn_model<G>(input_dim: usize, output_dim: usize, g: G) -> FnModel<impl Fn(&[f64]) -> Result<Vec<f64>, ModelError>>
where
    G: Fn(&[f64]) -> Vec<f64>,
{
    FnModel::new(input_dim, output_dim, move |y: &[f64]| Ok(g(y)))
}
