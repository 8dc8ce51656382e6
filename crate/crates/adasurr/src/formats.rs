//! Plain-text artifacts: tab-separated rows under `#` comment headers.
//!
//! Floats are written with 17 significant digits, which round-trips every
//! `f64` exactly. Header lines of the form `# key<TAB>value...` carry
//! metadata; the last header line names the columns.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use adasurr_core::adaptive::{BiasingParams, TraceRow};
use adasurr_core::distributions::{Independent, Marginal};
use adasurr_core::mcmc::Chain;
use adasurr_core::polychaos::PcSurrogate;
use adasurr_core::polynomials::{MultiIndex, MultiIndexSet};
use adasurr_core::quadrature::QuadratureRule;

use crate::error::{Error, Result};

pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Buffered tab-separated writer.
pub struct TsvWriter {
    path: PathBuf,
    out: BufWriter<File>,
}

impl TsvWriter {
    pub fn create(path: &Path) -> Result<Self> {
        let file = File::create(path).map_err(Error::io(path))?;
        Ok(TsvWriter { path: path.to_path_buf(), out: BufWriter::new(file) })
    }

    pub fn comment(&mut self, fields: &[&str]) -> Result<()> {
        writeln!(self.out, "# {}", fields.join("\t")).map_err(Error::io(&self.path))
    }

    pub fn meta(&mut self, key: &str, values: &[f64]) -> Result<()> {
        let mut fields = vec![key.to_string()];
        fields.extend(values.iter().map(|v| fmt_f64(*v)));
        writeln!(self.out, "# {}", fields.join("\t")).map_err(Error::io(&self.path))
    }

    pub fn row(&mut self, fields: &[String]) -> Result<()> {
        writeln!(self.out, "{}", fields.join("\t")).map_err(Error::io(&self.path))
    }

    pub fn floats(&mut self, values: &[f64]) -> Result<()> {
        let fields: Vec<String> = values.iter().map(|v| fmt_f64(*v)).collect();
        self.row(&fields)
    }

    pub fn finish(mut self) -> Result<()> {
        self.out.flush().map_err(Error::io(&self.path))
    }
}

/// Parsed table: header fields per comment line plus numeric rows.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub header: Vec<Vec<String>>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(Error::io(path))?;
        Self::parse(&text, path)
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut table = Table::default();
        for (n, line) in text.lines().enumerate() {
            if let Some(rest) = line.strip_prefix('#') {
                table.header.push(rest.trim_start().split('\t').map(str::to_string).collect());
            } else if !line.trim().is_empty() {
                let row = line
                    .split('\t')
                    .map(|f| f.trim().parse::<f64>())
                    .collect::<Result<Vec<f64>, _>>()
                    .map_err(|e| Error::Format { path: path.to_path_buf(), line: n + 1, msg: e.to_string() })?;
                table.rows.push(row);
            }
        }
        Ok(table)
    }

    /// Values following `key` on the first header line that starts with it.
    pub fn meta(&self, key: &str) -> Option<&[String]> {
        self.header.iter().find(|h| h.first().map(String::as_str) == Some(key)).map(|h| &h[1..])
    }

    pub fn meta_f64(&self, key: &str, path: &Path) -> Result<Vec<f64>> {
        let bad = |msg: String| Error::Format { path: path.to_path_buf(), line: 0, msg };
        let v = self.meta(key).ok_or_else(|| bad(format!("missing header {key}")))?;
        v.iter().map(|s| s.parse::<f64>().map_err(|e| bad(format!("{key}: {e}")))).collect()
    }

    pub fn meta_usize(&self, key: &str, path: &Path) -> Result<usize> {
        let v = self.meta_f64(key, path)?;
        match v.as_slice() {
            [x] if *x >= 0.0 && x.fract() == 0.0 => Ok(*x as usize),
            _ => Err(Error::Format { path: path.to_path_buf(), line: 0, msg: format!("{key} must be one integer") }),
        }
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[j]).collect()
    }

    fn check_width(&self, width: usize, path: &Path) -> Result<()> {
        match self.rows.iter().position(|r| r.len() != width) {
            None => Ok(()),
            Some(i) => Err(Error::Format {
                path: path.to_path_buf(),
                line: 0,
                msg: format!("row {} has {} fields, expected {width}", i + 1, self.rows[i].len()),
            }),
        }
    }
}

/// Observations with their measurement time and sensor.
#[derive(Debug, Clone, PartialEq)]
pub struct DataSet {
    pub times: Vec<f64>,
    pub sensors: Vec<usize>,
    pub values: Vec<f64>,
}

pub fn write_data(path: &Path, data: &DataSet, provenance: &[(&str, String)]) -> Result<()> {
    let mut w = TsvWriter::create(path)?;
    for (k, v) in provenance {
        w.comment(&[k, v])?;
    }
    w.comment(&["t", "sensor", "value"])?;
    for ((t, s), v) in data.times.iter().zip(&data.sensors).zip(&data.values) {
        w.row(&[fmt_f64(*t), s.to_string(), fmt_f64(*v)])?;
    }
    w.finish()
}

pub fn read_data(path: &Path) -> Result<DataSet> {
    let t = Table::read(path)?;
    t.check_width(3, path)?;
    Ok(DataSet { times: t.column(0), sensors: t.column(1).iter().map(|&s| s as usize).collect(), values: t.column(2) })
}

/// Physical nodes and weights of a quadrature rule.
pub fn write_rule(path: &Path, rule: &QuadratureRule, dist: &Independent) -> Result<()> {
    let mut w = TsvWriter::create(path)?;
    w.comment(&["dim", &rule.dim().to_string()])?;
    w.comment(&["nodes", &rule.len().to_string()])?;
    let mut cols = vec!["weight".to_string()];
    cols.extend((1..=rule.dim()).map(|i| format!("y_{i}")));
    w.comment(&cols.iter().map(String::as_str).collect::<Vec<_>>())?;
    let mut y = vec![0.0; rule.dim()];
    for (z, wt) in rule.nodes().zip(rule.weights()) {
        dist.from_standard(z, &mut y);
        let mut row = vec![*wt];
        row.extend_from_slice(&y);
        w.floats(&row)?;
    }
    w.finish()
}

/// Evaluation points of each surrogate built during adaptation.
pub fn write_nodes(path: &Path, dim: usize, per_surrogate: &[Vec<f64>]) -> Result<()> {
    let mut w = TsvWriter::create(path)?;
    let mut cols = vec!["surrogate".to_string()];
    cols.extend((1..=dim).map(|i| format!("y_{i}")));
    w.comment(&cols.iter().map(String::as_str).collect::<Vec<_>>())?;
    for (k, nodes) in per_surrogate.iter().enumerate() {
        for y in nodes.chunks_exact(dim) {
            let mut row = vec![k.to_string()];
            row.extend(y.iter().map(|v| fmt_f64(*v)));
            w.row(&row)?;
        }
    }
    w.finish()
}

pub fn write_surrogate(path: &Path, s: &PcSurrogate) -> Result<()> {
    let mut w = TsvWriter::create(path)?;
    w.comment(&["pc-surrogate"])?;
    w.comment(&["dim", &s.input_dim().to_string()])?;
    w.comment(&["outputs", &s.output_dim().to_string()])?;
    for m in s.distribution().marginals() {
        match *m {
            Marginal::Gaussian { mean, std } => w.comment(&["marginal", "gaussian", &fmt_f64(mean), &fmt_f64(std)])?,
            Marginal::Uniform { lower, upper } => w.comment(&["marginal", "uniform", &fmt_f64(lower), &fmt_f64(upper)])?,
        }
    }
    let mut cols: Vec<String> = (1..=s.input_dim()).map(|i| format!("alpha_{i}")).collect();
    cols.extend((1..=s.output_dim()).map(|i| format!("c_{i}")));
    w.comment(&cols.iter().map(String::as_str).collect::<Vec<_>>())?;
    let n_out = s.output_dim();
    for (term, alpha) in s.index_set().iter().enumerate() {
        let mut row: Vec<String> = alpha.exponents().iter().map(|a| a.to_string()).collect();
        row.extend(s.coefficients()[term * n_out..(term + 1) * n_out].iter().map(|c| fmt_f64(*c)));
        w.row(&row)?;
    }
    w.finish()
}

pub fn read_surrogate(path: &Path) -> Result<PcSurrogate> {
    let t = Table::read(path)?;
    let bad = |msg: &str| Error::Format { path: path.to_path_buf(), line: 0, msg: msg.to_string() };
    let dim = t.meta_usize("dim", path)?;
    let n_out = t.meta_usize("outputs", path)?;
    let mut marginals = Vec::new();
    for h in t.header.iter().filter(|h| h[0] == "marginal") {
        let p = |i: usize| h.get(i).and_then(|s| s.parse::<f64>().ok()).ok_or_else(|| bad("bad marginal line"));
        marginals.push(match h.get(1).map(String::as_str) {
            Some("gaussian") => Marginal::Gaussian { mean: p(2)?, std: p(3)? },
            Some("uniform") => Marginal::Uniform { lower: p(2)?, upper: p(3)? },
            _ => return Err(bad("unknown marginal kind")),
        });
    }
    if marginals.len() != dim {
        return Err(bad("marginal count differs from dim"));
    }
    t.check_width(dim + n_out, path)?;
    let mut indices = Vec::with_capacity(t.rows.len());
    let mut coeffs = Vec::with_capacity(t.rows.len() * n_out);
    for row in &t.rows {
        if row[..dim].iter().any(|a| *a < 0.0 || a.fract() != 0.0) {
            return Err(bad("multi-index exponents must be non-negative integers"));
        }
        indices.push(MultiIndex::new(row[..dim].iter().map(|&a| a as u32).collect()));
        coeffs.extend_from_slice(&row[dim..]);
    }
    let set = MultiIndexSet::from_indices(dim, indices).ok_or_else(|| bad("invalid multi-index set"))?;
    Ok(PcSurrogate::new(set, Independent::new(marginals), n_out, coeffs)?)
}

pub fn write_biasing(path: &Path, v: &BiasingParams) -> Result<()> {
    let mut w = TsvWriter::create(path)?;
    w.comment(&["i", "mean", "std"])?;
    for (i, (m, s)) in v.mean.iter().zip(&v.std).enumerate() {
        w.row(&[(i + 1).to_string(), fmt_f64(*m), fmt_f64(*s)])?;
    }
    w.finish()
}

pub fn read_biasing(path: &Path) -> Result<BiasingParams> {
    let t = Table::read(path)?;
    t.check_width(3, path)?;
    Ok(BiasingParams::new(t.column(1), t.column(2))?)
}

pub fn write_trace(path: &Path, trace: &[TraceRow], delta: f64) -> Result<()> {
    let mut w = TsvWriter::create(path)?;
    w.meta("delta", &[delta])?;
    let dim = trace.first().map_or(0, |r| r.params.dim());
    let mut cols = vec!["k".to_string(), "lambda".to_string()];
    cols.extend((1..=dim).map(|i| format!("mu_{i}")));
    cols.extend((1..=dim).map(|i| format!("sigma_{i}")));
    cols.extend(["ess".to_string(), "cum_evals".to_string()]);
    w.comment(&cols.iter().map(String::as_str).collect::<Vec<_>>())?;
    for r in trace {
        let mut row = vec![r.iteration.to_string(), fmt_f64(r.lambda)];
        row.extend(r.params.mean.iter().chain(&r.params.std).map(|v| fmt_f64(*v)));
        row.extend([fmt_f64(r.ess), r.model_evaluations.to_string()]);
        w.row(&row)?;
    }
    w.finish()
}

/// A chain read back from disk.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainData {
    pub dim: usize,
    pub burn_in: usize,
    /// Row-major, every step including burn-in.
    pub samples: Vec<f64>,
    pub ln_density: Vec<f64>,
    pub accepted: Vec<bool>,
}

impl ChainData {
    pub fn len(&self) -> usize {
        self.accepted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.accepted.is_empty()
    }

    pub fn kept(&self) -> &[f64] {
        &self.samples[self.burn_in * self.dim..]
    }

    pub fn component(&self, j: usize) -> Vec<f64> {
        self.kept().chunks_exact(self.dim).map(|r| r[j]).collect()
    }

    pub fn acceptance_rate(&self) -> f64 {
        let kept = &self.accepted[self.burn_in..];
        kept.iter().filter(|&&a| a).count() as f64 / kept.len().max(1) as f64
    }
}

impl From<&Chain> for ChainData {
    fn from(c: &Chain) -> Self {
        ChainData {
            dim: c.dim,
            burn_in: c.burn_in,
            samples: c.samples.clone(),
            ln_density: c.ln_density.clone(),
            accepted: c.accepted.clone(),
        }
    }
}

pub fn write_chain(path: &Path, c: &ChainData) -> Result<()> {
    let mut w = TsvWriter::create(path)?;
    w.comment(&["dim", &c.dim.to_string()])?;
    w.comment(&["burn_in", &c.burn_in.to_string()])?;
    let mut cols = vec!["step".to_string(), "accepted".to_string(), "ln_density".to_string()];
    cols.extend((1..=c.dim).map(|i| format!("y_{i}")));
    w.comment(&cols.iter().map(String::as_str).collect::<Vec<_>>())?;
    for i in 0..c.len() {
        let mut row = vec![(i + 1).to_string(), u8::from(c.accepted[i]).to_string(), fmt_f64(c.ln_density[i])];
        row.extend(c.samples[i * c.dim..(i + 1) * c.dim].iter().map(|v| fmt_f64(*v)));
        w.row(&row)?;
    }
    w.finish()
}

pub fn read_chain(path: &Path) -> Result<ChainData> {
    let t = Table::read(path)?;
    let dim = t.meta_usize("dim", path)?;
    let burn_in = t.meta_usize("burn_in", path)?;
    t.check_width(dim + 3, path)?;
    let mut c = ChainData {
        dim,
        burn_in,
        samples: Vec::with_capacity(t.rows.len() * dim),
        ln_density: Vec::with_capacity(t.rows.len()),
        accepted: Vec::with_capacity(t.rows.len()),
    };
    for row in &t.rows {
        c.accepted.push(row[1] != 0.0);
        c.ln_density.push(row[2]);
        c.samples.extend_from_slice(&row[3..]);
    }
    if burn_in >= c.len().max(1) {
        return Err(Error::Format { path: path.to_path_buf(), line: 0, msg: "burn-in covers the whole chain".into() });
    }
    Ok(c)
}

/// `key<TAB>value` lines.
pub fn write_key_values(path: &Path, pairs: &[(&str, String)]) -> Result<()> {
    let mut w = TsvWriter::create(path)?;
    for (k, v) in pairs {
        w.row(&[k.to_string(), v.clone()])?;
    }
    w.finish()
}

pub fn read_key_values(path: &Path) -> Result<Vec<(String, String)>> {
    let text = std::fs::read_to_string(path).map_err(Error::io(path))?;
    Ok(text
        .lines()
        .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
        .map(|l| {
            let (k, v) = l.split_once('\t').unwrap_or((l, ""));
            (k.to_string(), v.to_string())
        })
        .collect())
}
