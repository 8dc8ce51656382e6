use std::collections::HashMap;
use std::sync::Mutex;

use adasurr_core::models::{EvalCounter, ForwardModel, ModelError};

/// Memoizes a forward model on the exact bit pattern of its input.
///
/// Only successful evaluations are stored. `evaluation_count` reports calls
/// that reached the wrapped model, so cache hits cost nothing.
pub struct CachedModel<M> {
    inner: M,
    enabled: bool,
    table: Mutex<HashMap<Vec<u64>, Vec<f64>>>,
    misses: EvalCounter,
    hits: EvalCounter,
}

impl<M: ForwardModel> CachedModel<M> {
    pub fn new(inner: M, enabled: bool) -> Self {
        CachedModel { inner, enabled, table: Mutex::new(HashMap::new()), misses: EvalCounter::new(), hits: EvalCounter::new() }
    }

    pub fn hits(&self) -> u64 {
        self.hits.get()
    }

    pub fn inner(&self) -> &M {
        &self.inner
    }
}

impl<M> std::fmt::Debug for CachedModel<M> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CachedModel")
            .field("enabled", &self.enabled)
            .field("misses", &self.misses.get())
            .field("hits", &self.hits.get())
            .finish()
    }
}

impl<M: ForwardModel> ForwardModel for CachedModel<M> {
    fn input_dim(&self) -> usize {
        self.inner.input_dim()
    }

    fn output_dim(&self) -> usize {
        self.inner.output_dim()
    }

    fn evaluate(&self, y: &[f64]) -> Result<Vec<f64>, ModelError> {
        if !self.enabled {
            self.misses.bump();
            return self.inner.evaluate(y);
        }
        let key: Vec<u64> = y.iter().map(|v| v.to_bits()).collect();
        if let Some(g) = self.table.lock().expect("cache lock").get(&key) {
            self.hits.bump();
            return Ok(g.clone());
        }
        self.misses.bump();
        let g = self.inner.evaluate(y)?;
        self.table.lock().expect("cache lock").insert(key, g.clone());
        Ok(g)
    }

    fn evaluation_count(&self) -> u64 {
        self.misses.get()
    }
}
