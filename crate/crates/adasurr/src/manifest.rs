//! Run manifest: which files each stage produced and how many true-model
//! evaluations it spent. Wall times live in a separate file so that the
//! manifest itself is reproducible.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::formats::{read_key_values, write_key_values};

pub const MANIFEST_FILE: &str = "manifest.toml";
pub const TIMINGS_FILE: &str = "timings.tsv";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageRecord {
    pub outputs: Vec<String>,
    pub model_evaluations: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub config_hash: String,
    pub seed: u64,
    pub version: String,
    #[serde(default)]
    pub stages: BTreeMap<String, StageRecord>,
}

impl Manifest {
    pub fn new(config_hash: String, seed: u64) -> Self {
        Manifest { config_hash, seed, version: env!("CARGO_PKG_VERSION").to_string(), stages: BTreeMap::new() }
    }

    /// The manifest in `dir` if it was written for the same configuration
    /// and seed, otherwise a fresh one.
    pub fn load_or_new(dir: &Path, config_hash: &str, seed: u64) -> Result<Self> {
        match Self::load(dir)? {
            Some(m) if m.config_hash == config_hash && m.seed == seed => Ok(m),
            _ => Ok(Self::new(config_hash.to_string(), seed)),
        }
    }

    pub fn load(dir: &Path) -> Result<Option<Self>> {
        let path = dir.join(MANIFEST_FILE);
        if !path.exists() {
            return Ok(None);
        }
        let text = std::fs::read_to_string(&path).map_err(Error::io(&path))?;
        toml::from_str(&text)
            .map(Some)
            .map_err(|e| Error::Format { path, line: 0, msg: e.to_string() })
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        let path = dir.join(MANIFEST_FILE);
        let text = toml::to_string(self).expect("manifest serializes");
        std::fs::write(&path, text).map_err(Error::io(&path))
    }

    /// Records a finished stage; every output must exist in `dir`.
    pub fn record(&mut self, dir: &Path, stage: &str, outputs: Vec<String>, model_evaluations: u64) -> Result<()> {
        for o in &outputs {
            if !dir.join(o).exists() {
                return Err(Error::config(format!("stage {stage} did not produce {o}")));
            }
        }
        self.stages.insert(stage.to_string(), StageRecord { outputs, model_evaluations });
        self.save(dir)
    }

    pub fn total_model_evaluations(&self) -> u64 {
        self.stages.values().map(|s| s.model_evaluations).sum()
    }
}

/// Replaces the wall time recorded for `stage`.
pub fn record_timing(dir: &Path, stage: &str, elapsed: Duration) -> Result<()> {
    let path = dir.join(TIMINGS_FILE);
    let mut times: BTreeMap<String, String> =
        if path.exists() { read_key_values(&path)?.into_iter().collect() } else { BTreeMap::new() };
    times.insert(stage.to_string(), format!("{:.3}", elapsed.as_secs_f64()));
    let pairs: Vec<(&str, String)> = times.iter().map(|(k, v)| (k.as_str(), v.clone())).collect();
    write_key_values(&path, &pairs)
}
