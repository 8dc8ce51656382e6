//! Experiment stages. Each stage reads its inputs from, and writes its
//! outputs to, the run directory, so stages can be re-run independently.

use std::path::{Path, PathBuf};
use std::time::Instant;

use adasurr_core::adaptive::{self, BiasingParams, CeOutcome};
use adasurr_core::analysis::{
    flux_moments, kde2, kl_divergence_2d, kl_divergence_grid, normalize_log_density, silverman_bandwidth, tabulate,
    FluxMoments, Grid2, KlEstimate,
};
use adasurr_core::bayes::{log_posterior_unnormalized, GaussianLikelihood, Posterior};
use adasurr_core::distributions::Independent;
use adasurr_core::mcmc::{autocorrelation, decorrelation_lag, effective_sample_size, run_independence, run_random_walk, RandomWalkConfig};
use adasurr_core::models::{fn_model, ForwardModel, HeatModel, SourceModel};
use adasurr_core::polychaos::{project, PcSurrogate, Projection};
use adasurr_core::polynomials::{MultiIndexSet, PolynomialFamily};
use adasurr_core::quadrature::{gauss_rule, smolyak_rule, tensor_rule, OneDimRule, QuadratureRule, SparseGridSpec};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::cache::CachedModel;
use crate::config::{broadcast, ChainSpec, ExperimentConfig, GridSection, Problem, SamplerName, Target};
use crate::error::{Error, Result};
use crate::formats::{self, fmt_f64, ChainData, DataSet, TsvWriter};
use crate::manifest::{record_timing, Manifest};

pub const DATA_FILE: &str = "data.tsv";
pub const PRIOR_SURROGATE_FILE: &str = "prior_surrogate.pc";
pub const PRIOR_RULE_FILE: &str = "prior_rule.tsv";
pub const ADAPTIVE_SURROGATE_FILE: &str = "adaptive_surrogate.pc";
pub const BIASING_FILE: &str = "biasing.tsv";
pub const TRACE_FILE: &str = "trace.tsv";
pub const NODES_FILE: &str = "adaptive_nodes.tsv";
pub const ADAPT_SUMMARY_FILE: &str = "adapt_summary.tsv";

/// Autocorrelation level used to report a chain's decorrelation lag.
pub const DECORRELATION_THRESHOLD: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Synthesize,
    BuildSurrogate,
    Adapt,
    Sample,
    Analyze,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Synthesize => "synthesize-data",
            Stage::BuildSurrogate => "build-surrogate",
            Stage::Adapt => "adapt",
            Stage::Sample => "sample",
            Stage::Analyze => "analyze",
        }
    }

    /// Fixed offset added to the master seed.
    pub fn seed_offset(self) -> u64 {
        match self {
            Stage::Synthesize => 1,
            Stage::BuildSurrogate => 2,
            Stage::Adapt => 3,
            Stage::Sample => 4,
            Stage::Analyze => 5,
        }
    }
}

pub fn stage_rng(master: u64, stage: Stage, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master.wrapping_add(stage.seed_offset()));
    rng.set_stream(stream);
    rng
}

pub type Model = CachedModel<Box<dyn ForwardModel>>;

/// A configured experiment bound to an output directory.
#[derive(Debug, Clone)]
pub struct Experiment {
    config: ExperimentConfig,
    out: PathBuf,
    hash: String,
}

impl Experiment {
    pub fn new(mut config: ExperimentConfig, out: &Path, seed: Option<u64>) -> Result<Self> {
        if let Some(s) = seed {
            config.seed = s;
        }
        config.validate()?;
        std::fs::create_dir_all(out).map_err(Error::io(out))?;
        let hash = config.hash();
        Ok(Experiment { config, out: out.to_path_buf(), hash })
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.config
    }

    pub fn out_dir(&self) -> &Path {
        &self.out
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    pub fn manifest(&self) -> Result<Manifest> {
        Manifest::load_or_new(&self.out, &self.hash, self.config.seed)
    }

    fn finish(&self, stage: &str, outputs: Vec<String>, evaluations: u64, started: Instant) -> Result<()> {
        self.manifest()?.record(&self.out, stage, outputs, evaluations)?;
        record_timing(&self.out, stage, started.elapsed())
    }

    /// The forward model, optionally on a mesh refined by `refine`.
    pub fn model(&self, refine: usize) -> Result<Model> {
        let cfg = &self.config;
        let inner: Box<dyn ForwardModel> = match cfg.problem {
            Problem::Source => Box::new(SourceModel::new(cfg.source_config().refined(refine))?),
            Problem::Heat => Box::new(HeatModel::new(cfg.heat_config().refined(refine))?),
            Problem::Custom => {
                let a = cfg.model.matrix.clone().unwrap_or_default();
                let b = cfg.model.offset.clone().unwrap_or_else(|| vec![0.0; a.len()]);
                let (rows, cols) = (a.len(), cfg.dim());
                Box::new(fn_model(cols, rows, move |y| {
                    a.iter().zip(&b).map(|(row, b)| b + row.iter().zip(y).map(|(p, q)| p * q).sum::<f64>()).collect()
                }))
            }
        };
        Ok(CachedModel::new(inner, cfg.cache.enabled))
    }

    /// Measurement time and sensor of each model output.
    fn layout(&self, n: usize) -> (Vec<f64>, Vec<usize>) {
        match self.config.problem {
            Problem::Source => {
                let times = self.config.source_config().measurement_times;
                let nt = times.len();
                ((0..n).map(|r| times[r % nt]).collect(), (0..n).map(|r| r / nt).collect())
            }
            Problem::Heat => (self.config.heat_config().measurement_times(), vec![0; n]),
            Problem::Custom => (vec![0.0; n], (0..n).collect()),
        }
    }

    pub fn synthesize_data(&self) -> Result<DataSet> {
        let started = Instant::now();
        let cfg = &self.config;
        let truth = cfg.data.truth.as_ref().ok_or_else(|| Error::config("data synthesis needs data.truth"))?;
        let model = self.model(cfg.data.refine)?;
        let clean = model.evaluate(truth)?;
        let mut values = clean.clone();
        if cfg.data.noise > 0.0 {
            let mut rng = stage_rng(cfg.seed, Stage::Synthesize, 0);
            let noise = Normal::new(0.0, cfg.data.noise).expect("positive noise");
            values.iter_mut().for_each(|v| *v += noise.sample(&mut rng));
        }
        let (times, sensors) = self.layout(values.len());
        let data = DataSet { times, sensors, values };
        let truth_text: Vec<String> = truth.iter().map(|v| fmt_f64(*v)).collect();
        formats::write_data(
            &self.path(DATA_FILE),
            &data,
            &[
                ("truth", truth_text.join(" ")),
                ("noise", fmt_f64(cfg.data.noise)),
                ("refine", cfg.data.refine.to_string()),
                ("seed", cfg.seed.to_string()),
            ],
        )?;
        self.finish(Stage::Synthesize.name(), vec![DATA_FILE.into()], model.evaluation_count(), started)?;
        Ok(data)
    }

    pub fn load_data(&self) -> Result<DataSet> {
        let path = match &self.config.data.file {
            Some(f) => f.clone(),
            None => self.path(DATA_FILE),
        };
        if !path.exists() {
            return Err(Error::config(format!("{} not found; run synthesize-data first", path.display())));
        }
        formats::read_data(&path)
    }

    pub fn likelihood(&self) -> Result<GaussianLikelihood> {
        let data = self.load_data()?;
        if !(self.config.data.noise > 0.0) {
            return Err(Error::config("inference needs data.noise > 0"));
        }
        let expected = self.model(1)?.output_dim();
        if data.values.len() != expected {
            return Err(Error::config(format!("data has {} values, model produces {expected}", data.values.len())));
        }
        Ok(GaussianLikelihood::homoscedastic(data.values, self.config.data.noise)?)
    }

    /// Quadrature in the standardized coordinates of `dist`.
    fn prior_rule(&self, grid: GridSection, dist: &Independent) -> Result<QuadratureRule> {
        let families = dist.families();
        match grid {
            GridSection::Tensor { points } => {
                let rules = families.iter().map(|&f| gauss_rule(f, points)).collect::<Result<Vec<_>, _>>()?;
                Ok(tensor_rule(&rules)?)
            }
            GridSection::Smolyak { level, rule } => {
                let rule: OneDimRule = rule.into();
                let want = match rule {
                    OneDimRule::GaussHermite => PolynomialFamily::HermiteProbabilist,
                    _ => PolynomialFamily::Legendre,
                };
                if families.iter().any(|&f| f != want) {
                    return Err(Error::config(format!("{} sparse grids do not match the prior marginals", rule.name())));
                }
                Ok(smolyak_rule(&SparseGridSpec { dim: dist.dim(), level, rule })?)
            }
        }
    }

    /// Prior-based surrogate.
    pub fn build_surrogate(&self) -> Result<Projection> {
        let started = Instant::now();
        let s = self.config.surrogate.ok_or_else(|| Error::config("missing [surrogate] section"))?;
        let prior = self.config.prior()?;
        let rule = self.prior_rule(s.grid, &prior)?;
        let model = self.model(1)?;
        let proj = project(&model, &prior, &MultiIndexSet::total_order(prior.dim(), s.order), &rule)?;
        formats::write_surrogate(&self.path(PRIOR_SURROGATE_FILE), &proj.surrogate)?;
        formats::write_rule(&self.path(PRIOR_RULE_FILE), &rule, &prior)?;
        self.finish(
            Stage::BuildSurrogate.name(),
            vec![PRIOR_SURROGATE_FILE.into(), PRIOR_RULE_FILE.into()],
            model.evaluation_count(),
            started,
        )?;
        Ok(proj)
    }

    pub fn adapt(&self) -> Result<CeOutcome> {
        let started = Instant::now();
        let ce = self.config.ce_config()?;
        let lik = self.likelihood()?;
        let prior = self.config.prior()?;
        let model = self.model(1)?;
        let mut rng = stage_rng(self.config.seed, Stage::Adapt, 0);
        let out = adaptive::run(&model, &prior, &lik, &ce, &mut rng)?;
        formats::write_trace(&self.path(TRACE_FILE), &out.trace, out.delta)?;
        formats::write_biasing(&self.path(BIASING_FILE), &out.final_params)?;
        formats::write_surrogate(&self.path(ADAPTIVE_SURROGATE_FILE), &out.final_surrogate)?;
        formats::write_nodes(&self.path(NODES_FILE), prior.dim(), &out.evaluation_nodes)?;
        formats::write_key_values(
            &self.path(ADAPT_SUMMARY_FILE),
            &[
                ("iterations", out.iterations().to_string()),
                ("model_evaluations", out.model_evaluations.to_string()),
                ("delta", fmt_f64(out.delta)),
                ("final_lambda", fmt_f64(out.trace.last().map_or(f64::NAN, |r| r.lambda))),
            ],
        )?;
        let outputs = [TRACE_FILE, BIASING_FILE, ADAPTIVE_SURROGATE_FILE, NODES_FILE, ADAPT_SUMMARY_FILE];
        self.finish(Stage::Adapt.name(), outputs.map(String::from).to_vec(), model.evaluation_count(), started)?;
        Ok(out)
    }

    fn read_biasing(&self) -> Result<Option<BiasingParams>> {
        let path = self.path(BIASING_FILE);
        if path.exists() {
            formats::read_biasing(&path).map(Some)
        } else {
            Ok(None)
        }
    }

    fn read_surrogate(&self, file: &str, stage: Stage) -> Result<PcSurrogate> {
        let path = self.path(file);
        if !path.exists() {
            return Err(Error::config(format!("{} not found; run {} first", path.display(), stage.name())));
        }
        formats::read_surrogate(&path)
    }

    /// Chain file names for a chain spec: samples and metadata.
    pub fn chain_files(spec: &ChainSpec) -> (String, String) {
        (format!("chain_{}.tsv", spec.name()), format!("chain_{}.meta", spec.name()))
    }

    /// Runs one chain against the posterior induced by `spec.target`.
    pub fn sample(&self, spec: &ChainSpec) -> Result<ChainData> {
        let started = Instant::now();
        let cfg = &self.config;
        let prior = cfg.prior()?;
        let lik = self.likelihood()?;
        let dim = prior.dim();
        let biasing = self.read_biasing()?;
        let exact;
        let model: &dyn ForwardModel = match spec.target {
            Target::Exact => {
                exact = Box::new(self.model(1)?) as Box<dyn ForwardModel>;
                exact.as_ref()
            }
            Target::Adaptive => {
                exact = Box::new(self.read_surrogate(ADAPTIVE_SURROGATE_FILE, Stage::Adapt)?);
                exact.as_ref()
            }
            Target::PriorSurrogate => {
                exact = Box::new(self.read_surrogate(PRIOR_SURROGATE_FILE, Stage::BuildSurrogate)?);
                exact.as_ref()
            }
        };
        let start = match (&cfg.sampler.start, &biasing) {
            (Some(s), _) => broadcast(s, dim, "sampler.start")?,
            (None, Some(b)) => b.mean.clone(),
            (None, None) => prior.means(),
        };
        let post = Posterior::new(prior.clone(), lik, model);
        let mut rng = stage_rng(cfg.seed, Stage::Sample, spec.stream());
        let (steps, burn_in) = (cfg.sampler.steps, cfg.sampler.burn_in);
        let chain = match spec.sampler {
            SamplerName::Independence => {
                let v = biasing.as_ref().ok_or_else(|| Error::config("independence sampling needs adapt output"))?;
                run_independence(&post, v, &start, steps, burn_in, &mut rng)?
            }
            SamplerName::Dram => {
                let std = match (&cfg.sampler.dram_std, &biasing) {
                    (Some(s), _) => broadcast(s, dim, "sampler.dram_std")?,
                    (None, Some(b)) => b.std.clone(),
                    (None, None) => prior.marginals().iter().map(|m| 0.1 * m.std()).collect(),
                };
                let rw = RandomWalkConfig::dram(RandomWalkConfig::diagonal(&std));
                run_random_walk(&post, &rw, &start, steps, burn_in, &mut rng)?
            }
        };
        let evaluations = model.evaluation_count();
        let data = ChainData::from(&chain);
        let (chain_file, meta_file) = Self::chain_files(spec);
        formats::write_chain(&self.path(&chain_file), &data)?;
        formats::write_key_values(
            &self.path(&meta_file),
            &[
                ("target", spec.target.name().to_string()),
                ("sampler", chain.sampler.name().to_string()),
                ("steps", steps.to_string()),
                ("burn_in", burn_in.to_string()),
                ("acceptance_rate", fmt_f64(chain.acceptance_rate())),
                ("jitter_events", chain.jitter_events.to_string()),
                ("model_evaluations", evaluations.to_string()),
                ("stream", spec.stream().to_string()),
            ],
        )?;
        let stage = format!("{}:{}", Stage::Sample.name(), spec.name());
        let evals = if spec.target == Target::Exact { evaluations } else { 0 };
        self.finish(&stage, vec![chain_file, meta_file], evals, started)?;
        Ok(data)
    }

    /// Runs every configured chain, or only those in `only`.
    pub fn sample_all(&self, only: &[ChainSpec]) -> Result<Vec<(ChainSpec, ChainData)>> {
        let chains: Vec<ChainSpec> = if only.is_empty() { self.config.sampler.chains.clone() } else { only.to_vec() };
        if chains.is_empty() {
            return Err(Error::config("no chains configured in [sampler]"));
        }
        chains.into_iter().map(|c| self.sample(&c).map(|d| (c, d))).collect()
    }

    pub fn load_chain(&self, spec: &ChainSpec) -> Result<ChainData> {
        let path = self.path(&Self::chain_files(spec).0);
        if !path.exists() {
            return Err(Error::config(format!("chain {} not found; run sample first", spec.name())));
        }
        formats::read_chain(&path)
    }

    pub fn analyze(&self) -> Result<AnalysisReport> {
        let started = Instant::now();
        let cfg = &self.config;
        let a = &cfg.analysis;
        let mut rng = stage_rng(cfg.seed, Stage::Analyze, 0);
        let mut outputs = Vec::new();
        let mut report = AnalysisReport::default();

        let mut chains = Vec::new();
        for spec in &cfg.sampler.chains {
            chains.push((*spec, self.load_chain(spec)?));
        }

        // 2D marginal KDEs and KL against the reference chain.
        for (spec, chain) in &chains {
            for &[i, j] in &a.pairs {
                let name = format!("kde_{}_{}_{}.tsv", spec.name(), i + 1, j + 1);
                write_kde(&self.path(&name), &chain.component(i), &chain.component(j), a.grid_points)?;
                outputs.push(name);
            }
        }
        if let Some(r) = &a.reference {
            let rspec = ChainSpec::parse(r).expect("validated");
            let reference = match chains.iter().find(|(s, _)| *s == rspec) {
                Some((_, c)) => c.clone(),
                None => self.load_chain(&rspec)?,
            };
            let mut w = TsvWriter::create(&self.path("kl.tsv"))?;
            w.comment(&["reference", r])?;
            w.comment(&["chain", "pair", "kl", "std_error"])?;
            for (spec, chain) in chains.iter().filter(|(s, _)| *s != rspec) {
                for &pair in &a.pairs {
                    let est = kl_between(&reference, chain, pair, a.grid_points, a.bootstrap, &mut rng)?;
                    let pair_name = format!("{},{}", pair[0] + 1, pair[1] + 1);
                    w.row(&[spec.name(), pair_name, fmt_f64(est.value), fmt_f64(est.std_error)])?;
                    report.kl.push(KlRow { chain: *spec, pair, estimate: est });
                }
            }
            w.finish()?;
            outputs.push("kl.tsv".into());
        }

        // Mixing diagnostics.
        if !chains.is_empty() {
            let k = a.autocorrelation_coordinate;
            let mut w = TsvWriter::create(&self.path("decorrelation.tsv"))?;
            w.comment(&["coordinate", &(k + 1).to_string()])?;
            w.comment(&["chain", "lag_below_threshold", "ess", "acceptance_rate"])?;
            let mut acfs = Vec::new();
            for (spec, chain) in &chains {
                let x = chain.component(k);
                let lag = decorrelation_lag(&x, DECORRELATION_THRESHOLD, a.max_lag.min(x.len() - 1));
                let ess = effective_sample_size(&x);
                let lag_text = lag.map_or("none".to_string(), |l| l.to_string());
                w.row(&[spec.name(), lag_text, fmt_f64(ess), fmt_f64(chain.acceptance_rate())])?;
                report.mixing.push(Mixing { chain: *spec, decorrelation_lag: lag, ess, acceptance_rate: chain.acceptance_rate() });
                acfs.push(autocorrelation(&x, a.max_lag));
            }
            w.finish()?;
            let mut w = TsvWriter::create(&self.path("autocorrelation.tsv"))?;
            w.comment(&["coordinate", &(k + 1).to_string()])?;
            let mut cols = vec!["lag".to_string()];
            cols.extend(chains.iter().map(|(s, _)| s.name()));
            w.comment(&cols.iter().map(String::as_str).collect::<Vec<_>>())?;
            let max_len = acfs.iter().map(Vec::len).max().unwrap_or(0);
            for lag in 0..max_len {
                let mut row = vec![lag.to_string()];
                row.extend(acfs.iter().map(|acf| acf.get(lag).map_or("nan".into(), |v| fmt_f64(*v))));
                w.row(&row)?;
            }
            w.finish()?;
            outputs.extend(["decorrelation.tsv".into(), "autocorrelation.tsv".into()]);
        }

        // Heat flux moments.
        if cfg.problem == Problem::Heat {
            let hc = cfg.heat_config();
            let times = hc.measurement_times();
            for (spec, chain) in &chains {
                let m = flux_moments(chain.kept(), chain.dim, &times, hc.horizon, a.flux_batches)?;
                let (f, g) = (format!("flux_{}.tsv", spec.name()), format!("flux_autocov_{}.tsv", spec.name()));
                write_flux(&self.path(&f), &self.path(&g), &m)?;
                outputs.extend([f, g]);
                report.flux.push((*spec, m));
            }
        }

        // Direct grid evaluation of 2D posteriors.
        let mut evaluations = 0;
        if let Some(pg) = a.posterior_grid {
            let grid = Grid2::new((pg.lower[0], pg.upper[0]), (pg.lower[1], pg.upper[1]), pg.points, pg.points);
            let prior = cfg.prior()?;
            let lik = self.likelihood()?;
            let manifest = self.manifest()?;
            let model = self.model(1)?;
            let exact = grid_posterior(&grid, &prior, &lik, &model)?;
            evaluations = model.evaluation_count();
            write_grid(&self.path("posterior_exact.tsv"), &grid, &exact)?;
            outputs.push("posterior_exact.tsv".into());
            let mut w = TsvWriter::create(&self.path("grid_kl.tsv"))?;
            w.comment(&["surrogate", "kl", "model_evaluations"])?;
            for (name, file, stage) in [
                ("adaptive", ADAPTIVE_SURROGATE_FILE, Stage::Adapt),
                ("prior_surrogate", PRIOR_SURROGATE_FILE, Stage::BuildSurrogate),
            ] {
                if !self.path(file).exists() {
                    continue;
                }
                let s = self.read_surrogate(file, stage)?;
                let p = grid_posterior(&grid, &prior, &lik, &s)?;
                let kl = kl_divergence_grid(&grid, &exact, &p)?;
                let evals = manifest.stages.get(stage.name()).map_or(0, |r| r.model_evaluations);
                let out = format!("posterior_{name}.tsv");
                write_grid(&self.path(&out), &grid, &p)?;
                outputs.push(out);
                w.row(&[name.to_string(), fmt_f64(kl), evals.to_string()])?;
                report.grid_kl.push(GridKl { surrogate: name.to_string(), kl, model_evaluations: evals });
            }
            w.finish()?;
            outputs.push("grid_kl.tsv".into());
        }

        self.finish(Stage::Analyze.name(), outputs, evaluations, started)?;
        Ok(report)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KlRow {
    pub chain: ChainSpec,
    pub pair: [usize; 2],
    pub estimate: KlEstimate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mixing {
    pub chain: ChainSpec,
    pub decorrelation_lag: Option<usize>,
    pub ess: f64,
    pub acceptance_rate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridKl {
    pub surrogate: String,
    pub kl: f64,
    pub model_evaluations: u64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct AnalysisReport {
    pub kl: Vec<KlRow>,
    pub mixing: Vec<Mixing>,
    pub flux: Vec<(ChainSpec, FluxMoments)>,
    pub grid_kl: Vec<GridKl>,
}

impl AnalysisReport {
    pub fn kl(&self, chain: ChainSpec, pair: [usize; 2]) -> Option<&KlEstimate> {
        self.kl.iter().find(|r| r.chain == chain && r.pair == pair).map(|r| &r.estimate)
    }

    pub fn mixing(&self, chain: ChainSpec) -> Option<&Mixing> {
        self.mixing.iter().find(|m| m.chain == chain)
    }

    pub fn flux(&self, chain: ChainSpec) -> Option<&FluxMoments> {
        self.flux.iter().find(|(c, _)| *c == chain).map(|(_, m)| m)
    }

    pub fn grid_kl(&self, surrogate: &str) -> Option<&GridKl> {
        self.grid_kl.iter().find(|g| g.surrogate == surrogate)
    }
}

/// `KL(p || q)` on the 2D marginal `pair` of two chains.
pub fn kl_between(
    p: &ChainData,
    q: &ChainData,
    pair: [usize; 2],
    grid_points: usize,
    bootstrap: usize,
    rng: &mut ChaCha8Rng,
) -> Result<KlEstimate> {
    let (px, py) = (p.component(pair[0]), p.component(pair[1]));
    let (qx, qy) = (q.component(pair[0]), q.component(pair[1]));
    Ok(kl_divergence_2d((&px, &py), (&qx, &qy), grid_points, bootstrap, rng)?)
}

/// Normalized posterior density on a 2D grid.
pub fn grid_posterior<M: ForwardModel + ?Sized>(
    grid: &Grid2,
    prior: &Independent,
    lik: &GaussianLikelihood,
    model: &M,
) -> Result<Vec<f64>> {
    let ln = tabulate(grid, |y| log_posterior_unnormalized(prior, lik, model, y))?;
    Ok(normalize_log_density(grid, &ln)?)
}

fn write_grid(path: &Path, grid: &Grid2, density: &[f64]) -> Result<()> {
    let mut w = TsvWriter::create(path)?;
    w.comment(&["x", "y", "density"])?;
    for i in 0..grid.nx {
        for j in 0..grid.ny {
            w.floats(&[grid.x(i), grid.y(j), density[i * grid.ny + j]])?;
        }
    }
    w.finish()
}

fn write_kde(path: &Path, xs: &[f64], ys: &[f64], points: usize) -> Result<()> {
    let pad = (3.0 * silverman_bandwidth(xs), 3.0 * silverman_bandwidth(ys));
    let grid = Grid2::covering(&[(xs, ys)], pad, points);
    let kde = kde2(xs, ys, &grid)?;
    let mut w = TsvWriter::create(path)?;
    w.meta("bandwidth", &[kde.bandwidth.0, kde.bandwidth.1])?;
    w.meta("coverage", &[kde.coverage])?;
    w.comment(&["x", "y", "density"])?;
    for i in 0..grid.nx {
        for j in 0..grid.ny {
            w.floats(&[grid.x(i), grid.y(j), kde.density[i * grid.ny + j]])?;
        }
    }
    w.finish()
}

fn write_flux(path: &Path, autocov_path: &Path, m: &FluxMoments) -> Result<()> {
    let mut w = TsvWriter::create(path)?;
    w.comment(&["t", "mean", "var", "skew", "mean_se", "var_se", "skew_se"])?;
    for t in 0..m.times.len() {
        w.floats(&[m.times[t], m.mean[t], m.variance[t], m.skewness[t], m.mean_se[t], m.variance_se[t], m.skewness_se[t]])?;
    }
    w.finish()?;
    let nt = m.times.len();
    let mut w = TsvWriter::create(autocov_path)?;
    w.meta("t", &m.times)?;
    for row in m.autocovariance.chunks_exact(nt) {
        w.floats(row)?;
    }
    w.finish()
}
