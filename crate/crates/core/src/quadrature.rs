//! Quadrature rules against probability measures.
//!
//! All rules integrate against a probability density (weights sum to one):
//! the standard normal for Gauss-Hermite, the uniform density on `[-1, 1]`
//! for Gauss-Legendre and Clenshaw-Curtis. Multivariate rules are built as
//! full tensor products or as Smolyak combinations of tensor rules, with
//! coincident nodes merged.

#[allow(unused_imports)] // inherent when std is linked
use num_traits::Float as _;
use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use thiserror::Error;

use crate::linalg::symmetric_tridiagonal_eigenvalues;
use crate::polynomials::{binomial, PolynomialFamily};

/// Nodes closer than this (in standardized coordinates) are merged.
pub const MERGE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QuadratureError {
    #[error("quadrature rule needs at least one point")]
    Empty,
    #[error("sparse grid level must be at least 1, got {0}")]
    Level(usize),
    #[error("sparse grid dimension must be at least 1")]
    Dimension,
    #[error("eigenvalue iteration failed for the {0}-point Jacobi matrix")]
    Eigen(usize),
}

/// A set of weighted nodes in `dim` dimensions. Nodes are stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    dim: usize,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl QuadratureRule {
    /// Builds a rule from row-major nodes. Panics if the lengths disagree.
    pub fn new(dim: usize, nodes: Vec<f64>, weights: Vec<f64>) -> Self {
        assert_eq!(nodes.len(), dim * weights.len(), "node/weight length mismatch");
        QuadratureRule { dim, nodes, weights }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of nodes.
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn node(&self, i: usize) -> &[f64] {
        &self.nodes[i * self.dim..(i + 1) * self.dim]
    }

    pub fn nodes(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.nodes.chunks_exact(self.dim.max(1))
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `sum_m w_m f(x_m)`.
    pub fn integrate<F: FnMut(&[f64]) -> f64>(&self, mut f: F) -> f64 {
        self.nodes().zip(&self.weights).map(|(x, w)| w * f(x)).sum()
    }
}

/// Gauss rule with `n_points` nodes for the family's probability weight.
/// Exact for polynomials of degree `<= 2 n_points - 1`.
///
/// Nodes are the eigenvalues of the orthonormal Jacobi matrix, refined by
/// Newton steps on the recurrence; weights come from the Christoffel function
/// `1 / sum_k psi_k(x)^2`.
pub fn gauss_rule(family: PolynomialFamily, n_points: usize) -> Result<QuadratureRule, QuadratureError> {
    if n_points == 0 {
        return Err(QuadratureError::Empty);
    }
    let diag = vec![0.0; n_points];
    let off: Vec<f64> = (1..n_points).map(|k| family.recurrence_coefficient(k)).collect();
    let mut nodes = symmetric_tridiagonal_eigenvalues(&diag, &off).ok_or(QuadratureError::Eigen(n_points))?;

    for x in nodes.iter_mut() {
        for _ in 0..3 {
            let (p, dp) = family.eval_with_derivative(n_points, *x);
            if dp == 0.0 {
                break;
            }
            let step = p / dp;
            *x -= step;
            if step.abs() <= 1e-16 * x.abs().max(1.0) {
                break;
            }
        }
    }
    // Both weights are even, so the rule is symmetric about zero.
    for i in 0..n_points / 2 {
        let j = n_points - 1 - i;
        let m = 0.5 * (nodes[j] - nodes[i]);
        nodes[i] = -m;
        nodes[j] = m;
    }
    if n_points % 2 == 1 {
        nodes[n_points / 2] = 0.0;
    }

    let mut psi = vec![0.0; n_points];
    let mut weights: Vec<f64> = nodes
        .iter()
        .map(|&x| {
            family.eval_all(x, &mut psi);
            1.0 / psi.iter().map(|p| p * p).sum::<f64>()
        })
        .collect();
    for i in 0..n_points / 2 {
        let j = n_points - 1 - i;
        let w = 0.5 * (weights[i] + weights[j]);
        weights[i] = w;
        weights[j] = w;
    }
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    Ok(QuadratureRule::new(1, nodes, weights))
}

/// Clenshaw-Curtis rule with `n_points` nodes `cos(j pi / (n - 1))` for the
/// uniform probability density on `[-1, 1]`, nodes ascending.
pub fn clenshaw_curtis(n_points: usize) -> Result<QuadratureRule, QuadratureError> {
    match n_points {
        0 => Err(QuadratureError::Empty),
        1 => Ok(QuadratureRule::new(1, vec![0.0], vec![1.0])),
        n => {
            let m = n - 1;
            let mut nodes = Vec::with_capacity(n);
            let mut weights = Vec::with_capacity(n);
            for j in 0..n {
                let theta = j as f64 * PI / m as f64;
                let mut s = 0.0;
                for k in 1..=m / 2 {
                    let b = if 2 * k == m { 1.0 } else { 2.0 };
                    s += b / (4.0 * (k * k) as f64 - 1.0) * (2.0 * k as f64 * theta).cos();
                }
                let c = if j == 0 || j == m { 1.0 } else { 2.0 };
                // Halved for the probability density.
                weights.push(0.5 * c / m as f64 * (1.0 - s));
                nodes.push(-theta.cos());
            }
            if m % 2 == 0 {
                nodes[m / 2] = 0.0;
            }
            for i in 0..n / 2 {
                let j = n - 1 - i;
                let x = 0.5 * (nodes[j] - nodes[i]);
                nodes[i] = -x;
                nodes[j] = x;
            }
            Ok(QuadratureRule::new(1, nodes, weights))
        }
    }
}

/// Full Cartesian product of one-dimensional rules; weights multiply.
/// The first rule varies slowest.
pub fn tensor_rule(per_dim: &[QuadratureRule]) -> Result<QuadratureRule, QuadratureError> {
    if per_dim.is_empty() {
        return Err(QuadratureError::Dimension);
    }
    let dim: usize = per_dim.iter().map(QuadratureRule::dim).sum();
    let count: usize = per_dim.iter().map(QuadratureRule::len).product();
    let mut nodes = Vec::with_capacity(count * dim);
    let mut weights = Vec::with_capacity(count);
    let mut counters = vec![0usize; per_dim.len()];
    for _ in 0..count {
        let mut w = 1.0;
        for (rule, &c) in per_dim.iter().zip(&counters) {
            nodes.extend_from_slice(rule.node(c));
            w *= rule.weights()[c];
        }
        weights.push(w);
        for k in (0..per_dim.len()).rev() {
            counters[k] += 1;
            if counters[k] < per_dim[k].len() {
                break;
            }
            counters[k] = 0;
        }
    }
    Ok(QuadratureRule::new(dim, nodes, weights))
}

/// One-dimensional rule family and its growth rule inside a sparse grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OneDimRule {
    /// Gauss-Hermite, `level` points.
    GaussHermite,
    /// Gauss-Legendre, `level` points.
    GaussLegendre,
    /// Clenshaw-Curtis, 1 point at level 1 and `2^(level-1) + 1` after.
    ClenshawCurtis,
}

impl OneDimRule {
    pub fn points_at_level(self, level: usize) -> usize {
        match self {
            OneDimRule::GaussHermite | OneDimRule::GaussLegendre => level,
            OneDimRule::ClenshawCurtis => {
                if level <= 1 {
                    1
                } else {
                    (1usize << (level - 1)) + 1
                }
            }
        }
    }

    pub fn rule_at_level(self, level: usize) -> Result<QuadratureRule, QuadratureError> {
        let n = self.points_at_level(level);
        match self {
            OneDimRule::GaussHermite => gauss_rule(PolynomialFamily::HermiteProbabilist, n),
            OneDimRule::GaussLegendre => gauss_rule(PolynomialFamily::Legendre, n),
            OneDimRule::ClenshawCurtis => clenshaw_curtis(n),
        }
    }

    /// The polynomial family orthonormal under this rule's measure.
    pub fn family(self) -> PolynomialFamily {
        match self {
            OneDimRule::GaussHermite => PolynomialFamily::HermiteProbabilist,
            OneDimRule::GaussLegendre | OneDimRule::ClenshawCurtis => PolynomialFamily::Legendre,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            OneDimRule::GaussHermite => "gauss_hermite",
            OneDimRule::GaussLegendre => "gauss_legendre",
            OneDimRule::ClenshawCurtis => "clenshaw_curtis",
        }
    }
}

/// Isotropic Smolyak grid: dimension, level `S >= 1`, and the 1D rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SparseGridSpec {
    pub dim: usize,
    pub level: usize,
    pub rule: OneDimRule,
}

/// Smolyak combination
/// `sum_{S <= |l| <= S + d - 1} (-1)^(S + d - 1 - |l|) C(d - 1, S + d - 1 - |l|) U^{l_1} x ... x U^{l_d}`
/// over level vectors `l_j >= 1`, with coincident nodes merged and their
/// weights summed. Nodes whose merged weight cancels to zero are dropped.
pub fn smolyak_rule(spec: &SparseGridSpec) -> Result<QuadratureRule, QuadratureError> {
    let d = spec.dim;
    if d == 0 {
        return Err(QuadratureError::Dimension);
    }
    if spec.level == 0 {
        return Err(QuadratureError::Level(0));
    }
    let q = spec.level + d - 1;

    // Shared table of distinct 1D nodes across levels; grid nodes are keyed by
    // their per-coordinate ids so merging is exact and order-independent.
    let mut table: Vec<f64> = Vec::new();
    let mut level_rules: Vec<(Vec<u32>, Vec<f64>)> = Vec::with_capacity(spec.level);
    for level in 1..=spec.level {
        let rule = spec.rule.rule_at_level(level)?;
        let ids = rule
            .nodes()
            .map(|x| {
                let x = x[0];
                match table.iter().position(|&t| (t - x).abs() <= MERGE_TOLERANCE) {
                    Some(id) => id as u32,
                    None => {
                        table.push(x);
                        (table.len() - 1) as u32
                    }
                }
            })
            .collect();
        level_rules.push((ids, rule.weights().to_vec()));
    }

    let mut merged: BTreeMap<Vec<u32>, usize> = BTreeMap::new();
    let mut keys: Vec<Vec<u32>> = Vec::new();
    let mut weights: Vec<f64> = Vec::new();
    let mut levels = vec![1usize; d];
    let mut key = vec![0u32; d];
    loop {
        let total: usize = levels.iter().sum();
        if total + d > q && total <= q {
            let gap = q - total;
            let sign = if gap % 2 == 0 { 1.0 } else { -1.0 };
            let coefficient = sign * binomial(d - 1, gap) as f64;
            let mut counters = vec![0usize; d];
            loop {
                let mut w = coefficient;
                for j in 0..d {
                    let (ids, ws) = &level_rules[levels[j] - 1];
                    key[j] = ids[counters[j]];
                    w *= ws[counters[j]];
                }
                match merged.get(&key) {
                    Some(&slot) => weights[slot] += w,
                    None => {
                        merged.insert(key.clone(), weights.len());
                        keys.push(key.clone());
                        weights.push(w);
                    }
                }
                let mut j = d;
                let mut done = true;
                while j > 0 {
                    j -= 1;
                    counters[j] += 1;
                    if counters[j] < level_rules[levels[j] - 1].0.len() {
                        done = false;
                        break;
                    }
                    counters[j] = 0;
                }
                if done {
                    break;
                }
            }
        }
        if !next_level_vector(&mut levels, q) {
            break;
        }
    }

    let scale: f64 = weights.iter().map(|w| w.abs()).sum();
    let mut nodes = Vec::with_capacity(keys.len() * d);
    let mut kept = Vec::with_capacity(weights.len());
    for (key, w) in keys.iter().zip(&weights) {
        if w.abs() <= 1e-15 * scale {
            continue;
        }
        nodes.extend(key.iter().map(|&id| table[id as usize]));
        kept.push(*w);
    }
    Ok(QuadratureRule::new(d, nodes, kept))
}

/// Advances `levels` (entries >= 1) to the next vector with `|l| <= q` in
/// odometer order with the last coordinate varying fastest.
fn next_level_vector(levels: &mut [usize], q: usize) -> bool {
    let d = levels.len();
    let mut j = d;
    while j > 0 {
        j -= 1;
        levels[j] += 1;
        if levels.iter().sum::<usize>() <= q {
            return true;
        }
        levels[j] = 1;
    }
    false
}
