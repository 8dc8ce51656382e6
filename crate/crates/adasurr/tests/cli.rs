use std::path::{Path, PathBuf};
use std::process::Command;

use adasurr::config::{ChainSpec, ExperimentConfig};
use adasurr::formats::{self, Table};
use adasurr::pipeline::{kl_between, stage_rng, Stage};
use adasurr::Experiment;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_adasurr"))
}

fn run(stage: &str, config: &Path, out: &Path) -> std::process::Output {
    bin().args([stage, "--config"]).arg(config).arg("--out").arg(out).output().unwrap()
}

fn ok(stage: &str, config: &Path, out: &Path) {
    let o = run(stage, config, out);
    assert!(o.status.success(), "{stage}: {}", String::from_utf8_lossy(&o.stderr));
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("run.cfg");
    std::fs::write(&p, text).unwrap();
    p
}

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

const LINEAR: &str = r#"
problem = "custom"
seed = 11
[model]
matrix = [[1.0]]
[prior]
kind = "gaussian"
mean = [0.0]
std = [1.4142135623730951]
[data]
noise = 0.1
truth = [0.8]
[surrogate]
order = 0
grid = { kind = "tensor", points = 3 }
[adaptive]
rho = 0.05
gamma = 1e-3
step_fraction = 0.1
samples = 20000
order = 1
grid = { kind = "tensor", points = 2 }
initial_mean = [0.0]
initial_std = [0.7]
[sampler]
steps = 4000
burn_in = 500
chains = [
  { target = "exact", sampler = "dram" },
  { target = "adaptive", sampler = "independence" },
]
[analysis]
reference = "exact-dram"
pairs = []
max_lag = 50
"#;

#[test]
fn source_data_has_eighteen_rows() {
    let dir = tempfile::tempdir().unwrap();
    ok("synthesize-data", &configs_dir().join("source_paper.cfg"), dir.path());
    let data = formats::read_data(&dir.path().join("data.tsv")).unwrap();
    assert_eq!(data.values.len(), 18);
    assert_eq!(data.sensors.iter().max(), Some(&8));
    assert_eq!(&data.times[..2], &[0.1, 0.2]);
}

#[test]
fn heat_data_has_fifty_rows() {
    let dir = tempfile::tempdir().unwrap();
    ok("synthesize-data", &configs_dir().join("heat_desk.cfg"), dir.path());
    let data = formats::read_data(&dir.path().join("data.tsv")).unwrap();
    assert_eq!(data.values.len(), 50);
    assert!((data.times[49] - 1.0).abs() < 1e-12);
}

#[test]
fn noiseless_data_is_the_model_output() {
    let dir = tempfile::tempdir().unwrap();
    let text = LINEAR
        .replace("matrix = [[1.0]]", "matrix = [[2.0], [-1.0]]\noffset = [0.5, 0.25]")
        .replace("noise = 0.1", "noise = 0.0");
    let cfg = write_config(dir.path(), &text);
    ok("synthesize-data", &cfg, dir.path());
    let data = formats::read_data(&dir.path().join("data.tsv")).unwrap();
    assert_eq!(data.values, vec![2.1, -0.55]);
    // Inference needs a positive noise level.
    assert_eq!(run("adapt", &cfg, dir.path()).status.code(), Some(2));
}

#[test]
fn zeroth_order_surrogate_is_the_prior_mean_output() {
    let dir = tempfile::tempdir().unwrap();
    let text = LINEAR.replace("matrix = [[1.0]]", "matrix = [[3.0]]\noffset = [1.5]");
    let cfg = write_config(dir.path(), &text);
    ok("build-surrogate", &cfg, dir.path());
    let s = formats::read_surrogate(&dir.path().join("prior_surrogate.pc")).unwrap();
    assert_eq!(s.index_set().len(), 1);
    assert!((s.coefficient(0, 0) - 1.5).abs() < 1e-12);
    assert!((s.evaluate(&[10.0]).unwrap()[0] - 1.5).abs() < 1e-12);
    let rule = Table::read(&dir.path().join("prior_rule.tsv")).unwrap();
    assert_eq!(rule.rows.len(), 3);
}

#[test]
fn conjugate_adapt_recovers_posterior() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), LINEAR);
    ok("synthesize-data", &cfg, dir.path());
    ok("adapt", &cfg, dir.path());
    let d = formats::read_data(&dir.path().join("data.tsv")).unwrap().values[0];
    let (prior_var, noise_var) = (2.0, 0.01);
    let post_var = 1.0 / (1.0 / prior_var + 1.0 / noise_var);
    let post_mean = post_var * d / noise_var;
    let v = formats::read_biasing(&dir.path().join("biasing.tsv")).unwrap();
    let trace = Table::read(&dir.path().join("trace.tsv")).unwrap();
    let ess = *trace.column(4).last().unwrap();
    let se = post_var.sqrt() / ess.sqrt();
    assert!((v.mean[0] - post_mean).abs() < 3.0 * se, "{} vs {post_mean} (se {se})", v.mean[0]);
    assert!((v.std[0] / post_var.sqrt() - 1.0).abs() < 0.05);
    let lambda = trace.column(1);
    assert_eq!(*lambda.last().unwrap(), 1.0);
    assert!(lambda.windows(2).all(|w| w[1] < w[0]));
}

#[test]
fn full_pipeline_is_bit_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [a.path(), b.path()] {
        let cfg = write_config(dir, LINEAR);
        for stage in ["synthesize-data", "build-surrogate", "adapt", "sample", "analyze"] {
            ok(stage, &cfg, dir);
        }
    }
    let mut files: Vec<String> = std::fs::read_dir(a.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|f| f != "timings.tsv")
        .collect();
    files.sort();
    assert!(files.contains(&"chain_exact-dram.tsv".to_string()));
    assert!(files.contains(&"manifest.toml".to_string()));
    for f in &files {
        let (x, y) = (std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap());
        assert!(x == y, "{f} differs");
    }
    // A different seed changes the draws.
    let c = tempfile::tempdir().unwrap();
    let cfg = write_config(c.path(), LINEAR);
    let o = bin().args(["synthesize-data", "--seed", "12", "--config"]).arg(&cfg).arg("--out").arg(c.path()).output().unwrap();
    assert!(o.status.success());
    assert_ne!(std::fs::read(c.path().join("data.tsv")).unwrap(), std::fs::read(a.path().join("data.tsv")).unwrap());
}

#[test]
fn single_chain_runs_only_that_chain() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), LINEAR);
    ok("synthesize-data", &cfg, dir.path());
    let o = bin().args(["sample", "--chain", "exact-dram", "--config"]).arg(&cfg).arg("--out").arg(dir.path()).output().unwrap();
    assert!(o.status.success());
    assert!(dir.path().join("chain_exact-dram.tsv").exists());
    assert!(!dir.path().join("chain_adaptive-independence.tsv").exists());
    // Analysis needs every configured chain.
    assert_eq!(run("analyze", &cfg, dir.path()).status.code(), Some(2));
    let o = bin().args(["sample", "--chain", "exact-gibbs", "--config"]).arg(&cfg).arg("--out").arg(dir.path()).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn chain_compared_with_itself_has_no_divergence() {
    let dir = tempfile::tempdir().unwrap();
    let text = LINEAR.replace("matrix = [[1.0]]", "matrix = [[1.0, 0.5], [0.0, 1.0]]").replace("truth = [0.8]", "truth = [0.8, -0.2]");
    let exp = Experiment::new(ExperimentConfig::parse(&text).unwrap(), dir.path(), None).unwrap();
    exp.synthesize_data().unwrap();
    let spec = ChainSpec::parse("exact-dram").unwrap();
    let chain = exp.sample(&spec).unwrap();
    let mut rng = stage_rng(1, Stage::Analyze, 0);
    let kl = kl_between(&chain, &chain, [0, 1], 100, 5, &mut rng).unwrap();
    assert!(kl.value.abs() < 1e-12, "{}", kl.value);
}

#[test]
fn bad_inputs_exit_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run("adapt", &dir.path().join("missing.cfg"), dir.path()).status.code(), Some(2));
    let cfg = write_config(dir.path(), &LINEAR.replace("rho = 0.05", "rho = 1.5"));
    assert_eq!(run("synthesize-data", &cfg, dir.path()).status.code(), Some(2));
    let cfg = write_config(dir.path(), LINEAR);
    // No data yet.
    assert_eq!(run("sample", &cfg, dir.path()).status.code(), Some(2));
    std::fs::write(dir.path().join("data.tsv"), "# t\tsensor\tvalue\n0\t0\tnot-a-number\n").unwrap();
    let o = run("adapt", &cfg, dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("data.tsv:2:"), "{}", String::from_utf8_lossy(&o.stderr));
}
