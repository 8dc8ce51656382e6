//! Orthonormal univariate polynomial families and multivariate bases.
//!
//! Each family is normalized against its probability weight, so that
//! `E[psi_i psi_j] = delta_ij` holds without separate norm bookkeeping:
//!
//! - [`PolynomialFamily::HermiteProbabilist`]: standard normal weight,
//!   `psi_n = He_n / sqrt(n!)`.
//! - [`PolynomialFamily::Legendre`]: uniform weight on `[-1, 1]`,
//!   `psi_n = sqrt(2n + 1) P_n`.
//!
//! Both satisfy the symmetric three-term recurrence
//! `x psi_n = b_{n+1} psi_{n+1} + b_n psi_{n-1}`, which is also the Jacobi
//! matrix used to build their Gauss rules.

#[allow(unused_imports)] // inherent when std is linked
use num_traits::Float as _;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use thiserror::Error;

/// Dimension mismatch between an input vector and a basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("dimension mismatch: expected {expected}, found {found}")]
pub struct DimensionMismatch {
    pub expected: usize,
    pub found: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PolynomialFamily {
    /// Probabilists' Hermite, orthonormal under `N(0, 1)`.
    HermiteProbabilist,
    /// Legendre, orthonormal under `U(-1, 1)`.
    Legendre,
}

impl PolynomialFamily {
    /// Off-diagonal recurrence coefficient `b_n`, `n >= 1`.
    pub fn recurrence_coefficient(self, n: usize) -> f64 {
        let n = n as f64;
        match self {
            PolynomialFamily::HermiteProbabilist => n.sqrt(),
            PolynomialFamily::Legendre => n / (4.0 * n * n - 1.0).sqrt(),
        }
    }

    /// Orthonormal `psi_degree(x)`.
    pub fn eval(self, degree: usize, x: f64) -> f64 {
        let mut prev = 0.0;
        let mut cur = 1.0;
        for n in 0..degree {
            let b_next = self.recurrence_coefficient(n + 1);
            let b_cur = if n == 0 { 0.0 } else { self.recurrence_coefficient(n) };
            let next = (x * cur - b_cur * prev) / b_next;
            prev = cur;
            cur = next;
        }
        cur
    }

    /// Writes `psi_0(x) ..= psi_{out.len() - 1}(x)` into `out`.
    pub fn eval_all(self, x: f64, out: &mut [f64]) {
        if out.is_empty() {
            return;
        }
        out[0] = 1.0;
        if out.len() > 1 {
            out[1] = x / self.recurrence_coefficient(1);
        }
        for n in 1..out.len().saturating_sub(1) {
            out[n + 1] = (x * out[n] - self.recurrence_coefficient(n) * out[n - 1])
                / self.recurrence_coefficient(n + 1);
        }
    }

    /// `(psi_n(x), psi_n'(x))`, used for Newton refinement of Gauss nodes.
    pub fn eval_with_derivative(self, degree: usize, x: f64) -> (f64, f64) {
        let (mut p0, mut p1) = (0.0, 1.0);
        let (mut d0, mut d1) = (0.0, 0.0);
        for n in 0..degree {
            let b_next = self.recurrence_coefficient(n + 1);
            let b_cur = if n == 0 { 0.0 } else { self.recurrence_coefficient(n) };
            let p2 = (x * p1 - b_cur * p0) / b_next;
            let d2 = (p1 + x * d1 - b_cur * d0) / b_next;
            p0 = p1;
            p1 = p2;
            d0 = d1;
            d1 = d2;
        }
        (p1, d1)
    }

    /// Support of the weight density.
    pub fn support(self) -> (f64, f64) {
        match self {
            PolynomialFamily::HermiteProbabilist => (f64::NEG_INFINITY, f64::INFINITY),
            PolynomialFamily::Legendre => (-1.0, 1.0),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            PolynomialFamily::HermiteProbabilist => "hermite",
            PolynomialFamily::Legendre => "legendre",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "hermite" => Some(PolynomialFamily::HermiteProbabilist),
            "legendre" => Some(PolynomialFamily::Legendre),
            _ => None,
        }
    }
}

impl fmt::Display for PolynomialFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Exponent tuple `(i_1, ..., i_n)` selecting one tensor-product basis term.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MultiIndex(Vec<u32>);

impl MultiIndex {
    pub fn new(exponents: Vec<u32>) -> Self {
        MultiIndex(exponents)
    }

    pub fn zeros(dim: usize) -> Self {
        MultiIndex(vec![0; dim])
    }

    pub fn exponents(&self) -> &[u32] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    /// Total order `|i|`.
    pub fn order(&self) -> u32 {
        self.0.iter().sum()
    }
}

impl From<Vec<u32>> for MultiIndex {
    fn from(v: Vec<u32>) -> Self {
        MultiIndex(v)
    }
}

/// An ordered collection of multi-indices of a common dimension.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MultiIndexSet {
    dim: usize,
    indices: Vec<MultiIndex>,
}

impl MultiIndexSet {
    /// Builds a set from explicit indices. Returns `None` on mixed dimensions.
    pub fn from_indices(dim: usize, indices: Vec<MultiIndex>) -> Option<Self> {
        if indices.iter().any(|i| i.dim() != dim) {
            return None;
        }
        Some(MultiIndexSet { dim, indices })
    }

    /// All indices with `|i| <= order` in graded lexicographic order: by total
    /// degree, then with larger leading exponents first, e.g.
    /// `(0,0), (1,0), (0,1), (2,0), (1,1), (0,2)`.
    pub fn total_order(dim: usize, order: u32) -> Self {
        let mut indices = Vec::with_capacity(binomial(dim + order as usize, dim));
        let mut scratch = vec![0u32; dim];
        for degree in 0..=order {
            push_compositions(&mut scratch, 0, degree, &mut indices);
        }
        MultiIndexSet { dim, indices }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[MultiIndex] {
        &self.indices
    }

    pub fn iter(&self) -> core::slice::Iter<'_, MultiIndex> {
        self.indices.iter()
    }

    /// Largest exponent in any single coordinate.
    pub fn max_degree(&self) -> u32 {
        self.indices
            .iter()
            .flat_map(|i| i.exponents().iter().copied())
            .max()
            .unwrap_or(0)
    }

    /// Largest total order.
    pub fn max_order(&self) -> u32 {
        self.indices.iter().map(MultiIndex::order).max().unwrap_or(0)
    }

    /// Downward closure check: every index obtained by decrementing one
    /// positive coordinate of a member is also a member.
    pub fn is_admissible(&self) -> bool {
        let mut sorted: Vec<&MultiIndex> = self.indices.iter().collect();
        sorted.sort();
        self.indices.iter().all(|idx| {
            (0..self.dim).all(|j| {
                if idx.0[j] == 0 {
                    return true;
                }
                let mut lower = idx.0.clone();
                lower[j] -= 1;
                let lower = MultiIndex(lower);
                sorted.binary_search(&&lower).is_ok()
            })
        })
    }

    /// Evaluates every basis function `Psi_i(y) = prod_j psi_{i_j}(y_j)` at
    /// `y`, one value per member of the set.
    pub fn eval(&self, families: &[PolynomialFamily], y: &[f64]) -> Result<Vec<f64>, DimensionMismatch> {
        let mut out = vec![0.0; self.len()];
        let mut scratch = Vec::new();
        self.eval_into(families, y, &mut out, &mut scratch)?;
        Ok(out)
    }

    /// Allocation-free variant of [`MultiIndexSet::eval`]. `scratch` is
    /// resized as needed and can be reused across calls.
    pub fn eval_into(
        &self,
        families: &[PolynomialFamily],
        y: &[f64],
        out: &mut [f64],
        scratch: &mut Vec<f64>,
    ) -> Result<(), DimensionMismatch> {
        if y.len() != self.dim {
            return Err(DimensionMismatch { expected: self.dim, found: y.len() });
        }
        if families.len() != self.dim {
            return Err(DimensionMismatch { expected: self.dim, found: families.len() });
        }
        let stride = self.max_degree() as usize + 1;
        scratch.clear();
        scratch.resize(stride * self.dim, 0.0);
        for (j, (&family, &yj)) in families.iter().zip(y).enumerate() {
            family.eval_all(yj, &mut scratch[j * stride..(j + 1) * stride]);
        }
        for (value, idx) in out.iter_mut().zip(&self.indices) {
            *value = idx
                .0
                .iter()
                .enumerate()
                .map(|(j, &e)| scratch[j * stride + e as usize])
                .product();
        }
        Ok(())
    }
}

fn push_compositions(scratch: &mut [u32], pos: usize, remaining: u32, out: &mut Vec<MultiIndex>) {
    if pos + 1 == scratch.len() {
        scratch[pos] = remaining;
        out.push(MultiIndex(scratch.to_vec()));
        return;
    }
    if scratch.is_empty() {
        return;
    }
    for first in (0..=remaining).rev() {
        scratch[pos] = first;
        push_compositions(scratch, pos + 1, remaining - first, out);
    }
}

/// Binomial coefficient `C(n, k)`.
pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc as usize
}
