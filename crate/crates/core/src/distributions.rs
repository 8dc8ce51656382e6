//! Independent product distributions.
//!
//! The same [`Independent`] type serves as a prior, as the input measure of a
//! PC surrogate, and (all-Gaussian) as a biasing distribution. Each marginal
//! knows its standardization to the reference measure of its polynomial
//! family: `z = (y - mean) / std` for Gaussians, the affine map onto `[-1, 1]`
//! for uniforms.

#[allow(unused_imports)] // inherent when std is linked
use num_traits::Float as _;
use alloc::vec::Vec;
use core::f64::consts::PI;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::polynomials::PolynomialFamily;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_7;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Marginal {
    Gaussian { mean: f64, std: f64 },
    Uniform { lower: f64, upper: f64 },
}

impl Marginal {
    pub fn is_valid(&self) -> bool {
        match *self {
            Marginal::Gaussian { mean, std } => mean.is_finite() && std.is_finite() && std > 0.0,
            Marginal::Uniform { lower, upper } => lower.is_finite() && upper.is_finite() && lower < upper,
        }
    }

    pub fn family(&self) -> PolynomialFamily {
        match self {
            Marginal::Gaussian { .. } => PolynomialFamily::HermiteProbabilist,
            Marginal::Uniform { .. } => PolynomialFamily::Legendre,
        }
    }

    pub fn to_standard(&self, y: f64) -> f64 {
        match *self {
            Marginal::Gaussian { mean, std } => (y - mean) / std,
            Marginal::Uniform { lower, upper } => (2.0 * y - lower - upper) / (upper - lower),
        }
    }

    pub fn from_standard(&self, z: f64) -> f64 {
        match *self {
            Marginal::Gaussian { mean, std } => mean + std * z,
            Marginal::Uniform { lower, upper } => 0.5 * (lower + upper) + 0.5 * (upper - lower) * z,
        }
    }

    pub fn ln_pdf(&self, y: f64) -> f64 {
        match *self {
            Marginal::Gaussian { mean, std } => {
                let z = (y - mean) / std;
                -0.5 * z * z - std.ln() - LN_SQRT_2PI
            }
            Marginal::Uniform { lower, upper } => {
                if (lower..=upper).contains(&y) {
                    -(upper - lower).ln()
                } else {
                    f64::NEG_INFINITY
                }
            }
        }
    }

    pub fn in_support(&self, y: f64) -> bool {
        match *self {
            Marginal::Gaussian { .. } => y.is_finite(),
            Marginal::Uniform { lower, upper } => (lower..=upper).contains(&y),
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            Marginal::Gaussian { mean, .. } => mean,
            Marginal::Uniform { lower, upper } => 0.5 * (lower + upper),
        }
    }

    pub fn std(&self) -> f64 {
        match *self {
            Marginal::Gaussian { std, .. } => std,
            Marginal::Uniform { lower, upper } => (upper - lower) / 12f64.sqrt(),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Marginal::Gaussian { mean, std } => {
                let z: f64 = StandardNormal.sample(rng);
                mean + std * z
            }
            Marginal::Uniform { lower, upper } => lower + (upper - lower) * rng.random::<f64>(),
        }
    }
}

/// Product of independent marginals.
#[derive(Debug, Clone, PartialEq)]
pub struct Independent {
    marginals: Vec<Marginal>,
}

impl Independent {
    pub fn new(marginals: Vec<Marginal>) -> Self {
        Independent { marginals }
    }

    /// Independent Gaussians with the given means and standard deviations.
    pub fn gaussian(mean: &[f64], std: &[f64]) -> Self {
        Independent {
            marginals: mean
                .iter()
                .zip(std)
                .map(|(&mean, &std)| Marginal::Gaussian { mean, std })
                .collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.marginals.len()
    }

    pub fn marginals(&self) -> &[Marginal] {
        &self.marginals
    }

    pub fn is_valid(&self) -> bool {
        !self.marginals.is_empty() && self.marginals.iter().all(Marginal::is_valid)
    }

    pub fn families(&self) -> Vec<PolynomialFamily> {
        self.marginals.iter().map(Marginal::family).collect()
    }

    pub fn in_support(&self, y: &[f64]) -> bool {
        y.len() == self.dim() && self.marginals.iter().zip(y).all(|(m, &v)| m.in_support(v))
    }

    /// Joint log-density; `-inf` outside the support.
    pub fn ln_pdf(&self, y: &[f64]) -> f64 {
        if y.len() != self.dim() {
            return f64::NEG_INFINITY;
        }
        let mut total = 0.0;
        for (m, &v) in self.marginals.iter().zip(y) {
            total += m.ln_pdf(v);
            if total == f64::NEG_INFINITY {
                break;
            }
        }
        total
    }

    pub fn to_standard(&self, y: &[f64], z: &mut [f64]) {
        for ((m, &v), out) in self.marginals.iter().zip(y).zip(z.iter_mut()) {
            *out = m.to_standard(v);
        }
    }

    pub fn from_standard(&self, z: &[f64], y: &mut [f64]) {
        for ((m, &v), out) in self.marginals.iter().zip(z).zip(y.iter_mut()) {
            *out = m.from_standard(v);
        }
    }

    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        for (m, o) in self.marginals.iter().zip(out.iter_mut()) {
            *o = m.sample(rng);
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.marginals.iter().map(|m| m.sample(rng)).collect()
    }

    pub fn means(&self) -> Vec<f64> {
        self.marginals.iter().map(Marginal::mean).collect()
    }
}

/// Standard normal density, kept for tests and analytic references.
pub fn standard_normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
}
