use std::path::PathBuf;
use std::process::ExitCode;

use adasurr::config::{ChainSpec, ExperimentConfig};
use adasurr::{Error, Experiment, Result};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "adasurr", version, about = "Adaptive surrogate Bayesian inference experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Overrides the configured master seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic noisy data from the configured truth.
    SynthesizeData(Common),
    /// Build the prior-based polynomial chaos surrogate.
    BuildSurrogate(Common),
    /// Run the adaptive tempering algorithm.
    Adapt(Common),
    /// Run the configured MCMC chains.
    Sample {
        #[command(flatten)]
        common: Common,
        /// Run only this chain, e.g. exact-dram. May be repeated.
        #[arg(long)]
        chain: Vec<String>,
    },
    /// Compute KL divergences, mixing diagnostics and flux moments.
    Analyze(Common),
}

fn experiment(c: &Common) -> Result<Experiment> {
    let config = ExperimentConfig::from_path(&c.config)?;
    Experiment::new(config, &c.out, c.seed)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::SynthesizeData(c) => {
            let data = experiment(&c)?.synthesize_data()?;
            eprintln!("wrote {} observations", data.values.len());
        }
        Command::BuildSurrogate(c) => {
            let p = experiment(&c)?.build_surrogate()?;
            eprintln!("prior surrogate: {} terms, {} model evaluations", p.surrogate.index_set().len(), p.model_evaluations);
        }
        Command::Adapt(c) => {
            let out = experiment(&c)?.adapt()?;
            eprintln!("adapt: {} iterations, {} model evaluations", out.iterations(), out.model_evaluations);
        }
        Command::Sample { common, chain } => {
            let only = chain
                .iter()
                .map(|n| ChainSpec::parse(n).ok_or_else(|| Error::config(format!("unknown chain {n}"))))
                .collect::<Result<Vec<_>>>()?;
            for (spec, data) in experiment(&common)?.sample_all(&only)? {
                eprintln!("{spec}: acceptance {:.3}", data.acceptance_rate());
            }
        }
        Command::Analyze(c) => {
            let report = experiment(&c)?.analyze()?;
            for row in &report.kl {
                eprintln!("KL {} ({},{}): {:.4}", row.chain, row.pair[0] + 1, row.pair[1] + 1, row.estimate.value);
            }
            for g in &report.grid_kl {
                eprintln!("grid KL {}: {:.4} ({} evaluations)", g.surrogate, g.kl, g.model_evaluations);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
