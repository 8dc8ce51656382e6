//! Experiment configuration, read from TOML files.

use std::fmt;
use std::path::{Path, PathBuf};

use adasurr_core::adaptive::{BiasingParams, CeConfig, GridChoice, LikelihoodLevel, StepRule, SurrogateSpec};
use adasurr_core::distributions::{Independent, Marginal};
use adasurr_core::models::{HeatModelConfig, SourceModelConfig};
use adasurr_core::quadrature::OneDimRule;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Problem {
    Source,
    Heat,
    /// Linear model `G(y) = A y + b` given in the `[model]` section.
    Custom,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: Problem,
    pub seed: u64,
    #[serde(default)]
    pub model: ModelSection,
    pub prior: PriorSection,
    pub data: DataSection,
    pub surrogate: Option<SurrogateSection>,
    pub adaptive: Option<AdaptiveSection>,
    #[serde(default)]
    pub sampler: SamplerSection,
    #[serde(default)]
    pub analysis: AnalysisSection,
    #[serde(default)]
    pub cache: CacheSection,
}

/// Model resolution and problem-specific settings. Unset fields keep the
/// library defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub mesh_nodes: Option<usize>,
    /// Heat problem only; the source solver integrates exactly in time.
    pub dt: Option<f64>,
    pub release_end: Option<f64>,
    pub fourier_modes: Option<usize>,
    pub n_measurements: Option<usize>,
    pub sensor: Option<f64>,
    /// Custom problem: rows of `A`.
    pub matrix: Option<Vec<Vec<f64>>>,
    /// Custom problem: `b`, zero if absent.
    pub offset: Option<Vec<f64>>,
}

/// Independent prior marginals. Length-one vectors are broadcast to the
/// parameter dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PriorSection {
    Uniform { lower: Vec<f64>, upper: Vec<f64> },
    Gaussian { mean: Vec<f64>, std: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    pub noise: f64,
    /// Parameters used to synthesize data.
    pub truth: Option<Vec<f64>>,
    /// Mesh refinement factor for synthesis.
    #[serde(default = "default_refine")]
    pub refine: usize,
    /// Existing data file; used instead of synthesis when present.
    pub file: Option<PathBuf>,
}

fn default_refine() -> usize {
    2
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleName {
    GaussHermite,
    GaussLegendre,
    ClenshawCurtis,
}

impl From<RuleName> for OneDimRule {
    fn from(r: RuleName) -> Self {
        match r {
            RuleName::GaussHermite => OneDimRule::GaussHermite,
            RuleName::GaussLegendre => OneDimRule::GaussLegendre,
            RuleName::ClenshawCurtis => OneDimRule::ClenshawCurtis,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GridSection {
    /// Tensor Gauss rule matching each input marginal.
    Tensor { points: usize },
    Smolyak { level: usize, rule: RuleName },
}

impl GridSection {
    fn to_choice(self) -> GridChoice {
        match self {
            GridSection::Tensor { points } => GridChoice::Tensor { points },
            GridSection::Smolyak { level, rule } => GridChoice::Smolyak { level, rule: rule.into() },
        }
    }
}

/// Prior-based surrogate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurrogateSection {
    pub order: u32,
    pub grid: GridSection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LevelName {
    #[default]
    BatchMax,
    GaussianKernel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdaptiveSection {
    pub rho: f64,
    pub gamma: f64,
    /// `delta = step_fraction * (lambda_1 - 1)`.
    pub step_fraction: Option<f64>,
    /// Fixed `delta`; exclusive with `step_fraction`.
    pub step: Option<f64>,
    pub samples: usize,
    #[serde(default = "default_max_iterations")]
    pub max_iterations: usize,
    pub order: u32,
    pub grid: GridSection,
    pub final_order: Option<u32>,
    pub final_grid: Option<GridSection>,
    pub initial_mean: Vec<f64>,
    pub initial_std: Vec<f64>,
    #[serde(default)]
    pub extra_final_passes: usize,
    #[serde(default = "default_sigma_min")]
    pub sigma_min: f64,
    #[serde(default)]
    pub likelihood_level: LevelName,
    #[serde(default = "default_min_ess")]
    pub min_ess: f64,
}

fn default_max_iterations() -> usize {
    50
}

fn default_sigma_min() -> f64 {
    1e-6
}

fn default_min_ess() -> f64 {
    adasurr_core::adaptive::MIN_UPDATE_ESS
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    Exact,
    Adaptive,
    PriorSurrogate,
}

impl Target {
    pub fn name(self) -> &'static str {
        match self {
            Target::Exact => "exact",
            Target::Adaptive => "adaptive",
            Target::PriorSurrogate => "prior_surrogate",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [Target::Exact, Target::Adaptive, Target::PriorSurrogate].into_iter().find(|t| t.name() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplerName {
    Independence,
    Dram,
}

impl SamplerName {
    pub fn name(self) -> &'static str {
        match self {
            SamplerName::Independence => "independence",
            SamplerName::Dram => "dram",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [SamplerName::Independence, SamplerName::Dram].into_iter().find(|t| t.name() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainSpec {
    pub target: Target,
    pub sampler: SamplerName,
}

impl ChainSpec {
    /// File stem, e.g. `exact-dram`.
    pub fn name(&self) -> String {
        format!("{}-{}", self.target.name(), self.sampler.name())
    }

    pub fn parse(s: &str) -> Option<Self> {
        let (t, k) = s.split_once('-')?;
        Some(ChainSpec { target: Target::parse(t)?, sampler: SamplerName::parse(k)? })
    }

    /// Stable stream index so a chain's draws do not depend on which other
    /// chains are configured.
    pub(crate) fn stream(&self) -> u64 {
        let t = match self.target {
            Target::Exact => 0,
            Target::Adaptive => 1,
            Target::PriorSurrogate => 2,
        };
        let s = match self.sampler {
            SamplerName::Independence => 0,
            SamplerName::Dram => 1,
        };
        2 * t + s
    }
}

impl fmt::Display for ChainSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerSection {
    #[serde(default = "default_steps")]
    pub steps: usize,
    #[serde(default = "default_burn_in")]
    pub burn_in: usize,
    /// Initial DRAM proposal standard deviations; defaults to the adapted
    /// biasing std, or a tenth of the prior std.
    pub dram_std: Option<Vec<f64>>,
    /// Starting point; defaults to the adapted biasing mean, or the prior
    /// mean.
    pub start: Option<Vec<f64>>,
    #[serde(default)]
    pub chains: Vec<ChainSpec>,
}

fn default_steps() -> usize {
    100_000
}

fn default_burn_in() -> usize {
    10_000
}

impl Default for SamplerSection {
    fn default() -> Self {
        SamplerSection { steps: default_steps(), burn_in: default_burn_in(), dram_std: None, start: None, chains: Vec::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisSection {
    /// Chain name used as `p` in `KL(p || q)`, e.g. `exact-dram`.
    pub reference: Option<String>,
    /// Parameter index pairs for 2D marginals.
    #[serde(default)]
    pub pairs: Vec<[usize; 2]>,
    #[serde(default = "default_grid_points")]
    pub grid_points: usize,
    #[serde(default = "default_bootstrap")]
    pub bootstrap: usize,
    /// Coordinate whose autocorrelation is reported.
    #[serde(default)]
    pub autocorrelation_coordinate: usize,
    #[serde(default = "default_max_lag")]
    pub max_lag: usize,
    #[serde(default = "default_flux_batches")]
    pub flux_batches: usize,
    /// Direct grid evaluation of 2D posteriors.
    pub posterior_grid: Option<PosteriorGridSection>,
}

fn default_grid_points() -> usize {
    200
}

fn default_bootstrap() -> usize {
    20
}

fn default_max_lag() -> usize {
    1000
}

fn default_flux_batches() -> usize {
    50
}

impl Default for AnalysisSection {
    fn default() -> Self {
        AnalysisSection {
            reference: None,
            pairs: Vec::new(),
            grid_points: default_grid_points(),
            bootstrap: default_bootstrap(),
            autocorrelation_coordinate: 0,
            max_lag: default_max_lag(),
            flux_batches: default_flux_batches(),
            posterior_grid: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PosteriorGridSection {
    pub points: usize,
    pub lower: [f64; 2],
    pub upper: [f64; 2],
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CacheSection {
    /// Memoize true-model evaluations by exact input bits.
    #[serde(default)]
    pub enabled: bool,
}

impl ExperimentConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(Error::io(path))?;
        let mut cfg = Self::parse(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })?;
        // Relative data paths are taken relative to the config file.
        if let (Some(file), Some(dir)) = (cfg.data.file.as_mut(), path.parent()) {
            if file.is_relative() {
                *file = dir.join(&*file);
            }
        }
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// SHA-256 over the canonical serialization, so formatting and comments
    /// do not matter.
    pub fn hash(&self) -> String {
        let canonical = toml::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }

    pub fn dim(&self) -> usize {
        match self.problem {
            Problem::Source => 2,
            Problem::Heat => self.heat_config().parameter_dim(),
            Problem::Custom => self.model.matrix.as_ref().and_then(|m| m.first()).map_or(0, |r| r.len()),
        }
    }

    pub fn source_config(&self) -> SourceModelConfig {
        let mut c = SourceModelConfig::default();
        if let Some(n) = self.model.mesh_nodes {
            c.mesh_nodes = n;
        }
        if let Some(t) = self.model.release_end {
            c.release_end = t;
        }
        c
    }

    pub fn heat_config(&self) -> HeatModelConfig {
        let mut c = HeatModelConfig::default();
        if let Some(n) = self.model.mesh_nodes {
            c.mesh_nodes = n;
        }
        if let Some(dt) = self.model.dt {
            c.dt = dt;
        }
        if let Some(m) = self.model.fourier_modes {
            c.fourier_modes = m;
        }
        if let Some(n) = self.model.n_measurements {
            c.n_measurements = n;
        }
        if let Some(s) = self.model.sensor {
            c.sensor = s;
        }
        c
    }

    pub fn prior(&self) -> Result<Independent> {
        let dim = self.dim();
        let marginals: Vec<Marginal> = match &self.prior {
            PriorSection::Uniform { lower, upper } => {
                let (lo, hi) = (broadcast(lower, dim, "prior.lower")?, broadcast(upper, dim, "prior.upper")?);
                lo.into_iter().zip(hi).map(|(lower, upper)| Marginal::Uniform { lower, upper }).collect()
            }
            PriorSection::Gaussian { mean, std } => {
                let (m, s) = (broadcast(mean, dim, "prior.mean")?, broadcast(std, dim, "prior.std")?);
                m.into_iter().zip(s).map(|(mean, std)| Marginal::Gaussian { mean, std }).collect()
            }
        };
        let prior = Independent::new(marginals);
        if !prior.is_valid() {
            return Err(Error::config("prior marginals need std > 0 and lower < upper"));
        }
        Ok(prior)
    }

    pub fn ce_config(&self) -> Result<CeConfig> {
        let a = self.adaptive.as_ref().ok_or_else(|| Error::config("missing [adaptive] section"))?;
        let dim = self.dim();
        let step = match (a.step_fraction, a.step) {
            (Some(f), None) => StepRule::FractionOfFirst(f),
            (None, Some(d)) => StepRule::Fixed(d),
            _ => return Err(Error::config("set exactly one of adaptive.step_fraction and adaptive.step")),
        };
        let surrogate = SurrogateSpec { order: a.order, grid: a.grid.to_choice() };
        let final_surrogate = SurrogateSpec {
            order: a.final_order.unwrap_or(a.order),
            grid: a.final_grid.unwrap_or(a.grid).to_choice(),
        };
        for g in [surrogate.grid, final_surrogate.grid] {
            if let GridChoice::Smolyak { rule, .. } = g {
                if rule != OneDimRule::GaussHermite {
                    return Err(Error::config("adaptive surrogates need Gauss-Hermite grids"));
                }
            }
        }
        let initial = BiasingParams::new(
            broadcast(&a.initial_mean, dim, "adaptive.initial_mean")?,
            broadcast(&a.initial_std, dim, "adaptive.initial_std")?,
        )?;
        let config = CeConfig {
            rho: a.rho,
            gamma: a.gamma,
            step,
            samples: a.samples,
            max_iterations: a.max_iterations,
            surrogate,
            final_surrogate,
            initial,
            extra_final_passes: a.extra_final_passes,
            sigma_min: a.sigma_min,
            level: match a.likelihood_level {
                LevelName::BatchMax => LikelihoodLevel::BatchMax,
                LevelName::GaussianKernel => LikelihoodLevel::GaussianKernel,
            },
            min_ess: a.min_ess,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        match self.problem {
            Problem::Custom => {
                let m = self.model.matrix.as_ref().ok_or_else(|| Error::config("custom problem needs model.matrix"))?;
                let cols = m.first().map_or(0, |r| r.len());
                if cols == 0 || m.iter().any(|r| r.len() != cols) {
                    return Err(Error::config("model.matrix must be a non-empty rectangular array"));
                }
                if let Some(b) = &self.model.offset {
                    if b.len() != m.len() {
                        return Err(Error::config("model.offset must have one entry per matrix row"));
                    }
                }
            }
            _ => {
                if self.model.matrix.is_some() || self.model.offset.is_some() {
                    return Err(Error::config("model.matrix and model.offset apply to custom problems only"));
                }
            }
        }
        if self.problem == Problem::Source && self.model.dt.is_some() {
            return Err(Error::config("the source solver integrates exactly in time; remove model.dt"));
        }
        let dim = self.dim();
        self.prior()?;
        if !(self.data.noise >= 0.0 && self.data.noise.is_finite()) {
            return Err(Error::config("data.noise must be finite and non-negative"));
        }
        if self.data.refine == 0 {
            return Err(Error::config("data.refine must be at least 1"));
        }
        if let Some(t) = &self.data.truth {
            if t.len() != dim {
                return Err(Error::config(format!("data.truth has {} entries, expected {dim}", t.len())));
            }
        }
        if let Some(f) = &self.data.file {
            if !f.exists() {
                return Err(Error::config(format!("data file {} does not exist", f.display())));
            }
        }
        if self.adaptive.is_some() {
            self.ce_config()?;
        }
        if self.sampler.burn_in >= self.sampler.steps {
            return Err(Error::config("sampler.burn_in must be smaller than sampler.steps"));
        }
        for (v, name) in [(&self.sampler.dram_std, "sampler.dram_std"), (&self.sampler.start, "sampler.start")] {
            if let Some(v) = v {
                broadcast(v, dim, name)?;
            }
        }
        for c in &self.sampler.chains {
            if (c.sampler == SamplerName::Independence || c.target == Target::Adaptive) && self.adaptive.is_none() {
                return Err(Error::config(format!("chain {c} needs an [adaptive] section")));
            }
            if c.target == Target::PriorSurrogate && self.surrogate.is_none() {
                return Err(Error::config("prior_surrogate chains need a [surrogate] section"));
            }
        }
        if let Some(r) = &self.analysis.reference {
            ChainSpec::parse(r).ok_or_else(|| Error::config(format!("unknown reference chain {r}")))?;
        }
        for p in &self.analysis.pairs {
            if p[0] >= dim || p[1] >= dim || p[0] == p[1] {
                return Err(Error::config(format!("invalid marginal pair {p:?}")));
            }
        }
        if self.analysis.autocorrelation_coordinate >= dim {
            return Err(Error::config("analysis.autocorrelation_coordinate out of range"));
        }
        if self.analysis.grid_points < 2 {
            return Err(Error::config("analysis.grid_points must be at least 2"));
        }
        if let Some(g) = &self.analysis.posterior_grid {
            if dim != 2 || g.points < 2 || !(g.lower[0] < g.upper[0] && g.lower[1] < g.upper[1]) {
                return Err(Error::config("analysis.posterior_grid needs a 2D problem and a proper box"));
            }
        }
        Ok(())
    }
}

pub(crate) fn broadcast(v: &[f64], dim: usize, name: &str) -> Result<Vec<f64>> {
    match v.len() {
        1 => Ok(vec![v[0]; dim]),
        n if n == dim => Ok(v.to_vec()),
        n => Err(Error::config(format!("{name} has {n} entries, expected 1 or {dim}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
problem = "custom"
seed = 7
[model]
matrix = [[1.0]]
[prior]
kind = "gaussian"
mean = [0.0]
std = [1.4142135623730951]
[data]
noise = 0.1
truth = [0.3]
"#;

    #[test]
    fn minimal_custom_config() {
        let cfg = ExperimentConfig::parse(MINIMAL).unwrap();
        assert_eq!(cfg.dim(), 1);
        assert_eq!(cfg.data.refine, 2);
        assert_eq!(cfg.sampler.steps, 100_000);
        assert!(!cfg.cache.enabled);
    }

    #[test]
    fn hash_ignores_formatting_but_not_values() {
        let a = ExperimentConfig::parse(MINIMAL).unwrap();
        let b = ExperimentConfig::parse(&format!("# comment\n{}", MINIMAL.replace("seed = 7", "seed   =   7"))).unwrap();
        assert_eq!(a.hash(), b.hash());
        let c = ExperimentConfig::parse(&MINIMAL.replace("seed = 7", "seed = 8")).unwrap();
        assert_ne!(a.hash(), c.hash());
        assert_eq!(a.hash().len(), 64);
    }

    #[test]
    fn rejects_bad_configs() {
        for bad in [
            MINIMAL.replace("noise = 0.1", "noise = -1.0"),
            MINIMAL.replace("truth = [0.3]", "truth = [0.3, 0.1]"),
            MINIMAL.replace("std = [1.4142135623730951]", "std = [0.0]"),
            MINIMAL.replace("seed = 7", "seed = 7\nunknown = 1"),
            MINIMAL.replace("matrix = [[1.0]]", "matrix = [[1.0], [1.0, 2.0]]"),
            format!("{MINIMAL}\n[sampler]\nsteps = 10\nburn_in = 10\n"),
            format!("{MINIMAL}\n[analysis]\nreference = \"exact-gibbs\"\n"),
        ] {
            let err = ExperimentConfig::parse(&bad).unwrap_err();
            assert_eq!(err.exit_code(), 2, "{bad}: {err}");
        }
    }

    #[test]
    fn chain_names_round_trip() {
        for t in [Target::Exact, Target::Adaptive, Target::PriorSurrogate] {
            for s in [SamplerName::Independence, SamplerName::Dram] {
                let c = ChainSpec { target: t, sampler: s };
                assert_eq!(ChainSpec::parse(&c.name()), Some(c));
            }
        }
    }
}
