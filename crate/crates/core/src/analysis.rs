//! Posterior summaries: 2D kernel density estimates, KL divergences between
//! densities on a shared grid, and moments of the heat-flux functional.
//!
//! KDEs bin samples linearly onto the grid and convolve the bin counts with
//! a Gaussian product kernel, one axis at a time.

#[allow(unused_imports)] // inherent when std is linked
use num_traits::Float as _;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use rand::Rng;
use thiserror::Error;

use crate::models::flux_eval;
use crate::stats;

/// Floor applied to densities inside the KL logarithm.
pub const DENSITY_FLOOR: f64 = 1e-300;
/// Minimum fraction of each sample set that must fall on the KL grid.
pub const MIN_COVERAGE: f64 = 0.999;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error("need at least {needed} samples, got {found}")]
    TooFewSamples { needed: usize, found: usize },
    #[error("samples have zero variance in coordinate {0}")]
    ZeroVariance(usize),
    #[error("grid covers only {coverage:.5} of the sample mass")]
    Coverage { coverage: f64 },
    #[error("grid and density sizes differ")]
    Shape,
    #[error("density does not integrate to a positive finite value")]
    Normalization,
}

/// Uniform tensor grid on `[x0, x1] x [y0, y1]`. Values on it are stored
/// `[i * ny + j]` for the point `(x_i, y_j)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid2 {
    pub x0: f64,
    pub x1: f64,
    pub nx: usize,
    pub y0: f64,
    pub y1: f64,
    pub ny: usize,
}

impl Grid2 {
    pub fn new(x: (f64, f64), y: (f64, f64), nx: usize, ny: usize) -> Self {
        Grid2 { x0: x.0, x1: x.1, nx, y0: y.0, y1: y.1, ny }
    }

    pub fn dx(&self) -> f64 {
        (self.x1 - self.x0) / (self.nx - 1) as f64
    }

    pub fn dy(&self) -> f64 {
        (self.y1 - self.y0) / (self.ny - 1) as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x0 + i as f64 * self.dx()
    }

    pub fn y(&self, j: usize) -> f64 {
        self.y0 + j as f64 * self.dy()
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `n x n` grid spanning all sample sets padded by `pad` on every side.
    pub fn covering(sets: &[(&[f64], &[f64])], pad: (f64, f64), n: usize) -> Self {
        let range = |s: &[f64]| {
            s.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
        };
        let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for (xs, ys) in sets {
            let (a, b) = range(xs);
            let (c, d) = range(ys);
            x0 = x0.min(a);
            x1 = x1.max(b);
            y0 = y0.min(c);
            y1 = y1.max(d);
        }
        Grid2::new((x0 - pad.0, x1 + pad.0), (y0 - pad.1, y1 + pad.1), n, n)
    }

    /// 2D trapezoid rule.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        let mut total = 0.0;
        for i in 0..self.nx {
            let wi = if i == 0 || i == self.nx - 1 { 0.5 } else { 1.0 };
            for j in 0..self.ny {
                let wj = if j == 0 || j == self.ny - 1 { 0.5 } else { 1.0 };
                total += wi * wj * values[i * self.ny + j];
            }
        }
        total * self.dx() * self.dy()
    }

    fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x0 && x <= self.x1 && y >= self.y0 && y <= self.y1
    }
}

/// `1.06 sigma n^(-1/6)`.
pub fn silverman_bandwidth(x: &[f64]) -> f64 {
    1.06 * stats::sample_variance(x).sqrt() * (x.len() as f64).powf(-1.0 / 6.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Kde2 {
    pub grid: Grid2,
    pub bandwidth: (f64, f64),
    pub density: Vec<f64>,
    /// Fraction of samples lying on the grid.
    pub coverage: f64,
}

impl Kde2 {
    pub fn integral(&self) -> f64 {
        self.grid.integrate(&self.density)
    }
}

/// Gaussian-kernel density estimate of the pairs `(xs[k], ys[k])` with
/// Silverman bandwidths.
pub fn kde2(xs: &[f64], ys: &[f64], grid: &Grid2) -> Result<Kde2, AnalysisError> {
    let bw = bandwidths(xs, ys)?;
    Ok(kde2_with_bandwidth(xs, ys, grid, bw))
}

fn bandwidths(xs: &[f64], ys: &[f64]) -> Result<(f64, f64), AnalysisError> {
    if xs.len() < 100 || ys.len() != xs.len() {
        return Err(AnalysisError::TooFewSamples { needed: 100, found: xs.len().min(ys.len()) });
    }
    let hx = silverman_bandwidth(xs);
    let hy = silverman_bandwidth(ys);
    if !(hx > 0.0) {
        return Err(AnalysisError::ZeroVariance(0));
    }
    if !(hy > 0.0) {
        return Err(AnalysisError::ZeroVariance(1));
    }
    Ok((hx, hy))
}

/// KDE with explicit bandwidths.
pub fn kde2_with_bandwidth(xs: &[f64], ys: &[f64], grid: &Grid2, bandwidth: (f64, f64)) -> Kde2 {
    let (nx, ny) = (grid.nx, grid.ny);
    let (dx, dy) = (grid.dx(), grid.dy());
    let mut counts = vec![0.0; nx * ny];
    let mut inside = 0usize;
    for (&x, &y) in xs.iter().zip(ys) {
        if !grid.contains(x, y) {
            continue;
        }
        inside += 1;
        let sx = (x - grid.x0) / dx;
        let sy = (y - grid.y0) / dy;
        let i = (sx.floor() as usize).min(nx - 2);
        let j = (sy.floor() as usize).min(ny - 2);
        let fx = sx - i as f64;
        let fy = sy - j as f64;
        counts[i * ny + j] += (1.0 - fx) * (1.0 - fy);
        counts[(i + 1) * ny + j] += fx * (1.0 - fy);
        counts[i * ny + j + 1] += (1.0 - fx) * fy;
        counts[(i + 1) * ny + j + 1] += fx * fy;
    }
    let kernel = |n: usize, step: f64, h: f64| -> Vec<f64> {
        (0..n)
            .map(|d| {
                let u = d as f64 * step / h;
                (-0.5 * u * u).exp() / ((2.0 * PI).sqrt() * h)
            })
            .collect()
    };
    let kx = kernel(nx, dx, bandwidth.0);
    let ky = kernel(ny, dy, bandwidth.1);

    let mut partial = vec![0.0; nx * ny];
    for i in 0..nx {
        for k in 0..nx {
            let w = kx[i.abs_diff(k)];
            if w == 0.0 {
                continue;
            }
            let src = &counts[k * ny..(k + 1) * ny];
            let dst = &mut partial[i * ny..(i + 1) * ny];
            for (d, s) in dst.iter_mut().zip(src) {
                *d += w * s;
            }
        }
    }
    let norm = 1.0 / xs.len() as f64;
    let mut density = vec![0.0; nx * ny];
    for i in 0..nx {
        let row = &partial[i * ny..(i + 1) * ny];
        for j in 0..ny {
            let mut acc = 0.0;
            for (l, r) in row.iter().enumerate() {
                acc += ky[j.abs_diff(l)] * r;
            }
            density[i * ny + j] = acc * norm;
        }
    }
    Kde2 { grid: *grid, bandwidth, density, coverage: inside as f64 / xs.len() as f64 }
}

/// `int p ln(p / q)` over the grid by the trapezoid rule, with both
/// densities floored at [`DENSITY_FLOOR`] inside the logarithm.
pub fn kl_divergence_grid(grid: &Grid2, p: &[f64], q: &[f64]) -> Result<f64, AnalysisError> {
    if p.len() != grid.len() || q.len() != grid.len() {
        return Err(AnalysisError::Shape);
    }
    let integrand: Vec<f64> = p
        .iter()
        .zip(q)
        .map(|(&a, &b)| if a > 0.0 { a * (a.max(DENSITY_FLOOR).ln() - b.max(DENSITY_FLOOR).ln()) } else { 0.0 })
        .collect();
    Ok(grid.integrate(&integrand))
}

#[derive(Debug, Clone, PartialEq)]
pub struct KlEstimate {
    pub value: f64,
    /// Bootstrap standard error.
    pub std_error: f64,
    pub grid: Grid2,
    pub coverage: (f64, f64),
}

/// Sample-based `KL(p || q)` between two 2D sample sets via KDEs on a
/// shared grid (`grid_points` per side, padded by three bandwidths), with
/// a bootstrap standard error over `bootstrap` resamples.
pub fn kl_divergence_2d<R: Rng + ?Sized>(
    p: (&[f64], &[f64]),
    q: (&[f64], &[f64]),
    grid_points: usize,
    bootstrap: usize,
    rng: &mut R,
) -> Result<KlEstimate, AnalysisError> {
    let bp = bandwidths(p.0, p.1)?;
    let bq = bandwidths(q.0, q.1)?;
    let pad = (3.0 * bp.0.max(bq.0), 3.0 * bp.1.max(bq.1));
    let grid = Grid2::covering(&[p, q], pad, grid_points);
    kl_on_grid(p, q, &grid, bootstrap, rng)
}

/// As [`kl_divergence_2d`] on a caller-supplied grid.
pub fn kl_on_grid<R: Rng + ?Sized>(
    p: (&[f64], &[f64]),
    q: (&[f64], &[f64]),
    grid: &Grid2,
    bootstrap: usize,
    rng: &mut R,
) -> Result<KlEstimate, AnalysisError> {
    let bp = bandwidths(p.0, p.1)?;
    let bq = bandwidths(q.0, q.1)?;
    let kp = kde2_with_bandwidth(p.0, p.1, grid, bp);
    let kq = kde2_with_bandwidth(q.0, q.1, grid, bq);
    for c in [kp.coverage, kq.coverage] {
        if c < MIN_COVERAGE {
            return Err(AnalysisError::Coverage { coverage: c });
        }
    }
    let value = kl_divergence_grid(grid, &kp.density, &kq.density)?;

    let mut reps = Vec::with_capacity(bootstrap);
    let mut bx = Vec::new();
    let mut by = Vec::new();
    for _ in 0..bootstrap {
        resample(p, rng, &mut bx, &mut by);
        let rp = kde2_with_bandwidth(&bx, &by, grid, bp);
        resample(q, rng, &mut bx, &mut by);
        let rq = kde2_with_bandwidth(&bx, &by, grid, bq);
        reps.push(kl_divergence_grid(grid, &rp.density, &rq.density)?);
    }
    let std_error = if reps.len() > 1 { stats::sample_variance(&reps).sqrt() } else { 0.0 };
    Ok(KlEstimate { value, std_error, grid: *grid, coverage: (kp.coverage, kq.coverage) })
}

fn resample<R: Rng + ?Sized>(set: (&[f64], &[f64]), rng: &mut R, xs: &mut Vec<f64>, ys: &mut Vec<f64>) {
    let n = set.0.len();
    xs.clear();
    ys.clear();
    for _ in 0..n {
        let k = rng.random_range(0..n);
        xs.push(set.0[k]);
        ys.push(set.1[k]);
    }
}

/// Normalizes grid log-density values to a probability density
/// integrating to one under the trapezoid rule.
pub fn normalize_log_density(grid: &Grid2, ln_values: &[f64]) -> Result<Vec<f64>, AnalysisError> {
    if ln_values.len() != grid.len() {
        return Err(AnalysisError::Shape);
    }
    let max = ln_values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(AnalysisError::Normalization);
    }
    let mut p: Vec<f64> = ln_values.iter().map(|v| (v - max).exp()).collect();
    let z = grid.integrate(&p);
    if !(z > 0.0 && z.is_finite()) {
        return Err(AnalysisError::Normalization);
    }
    p.iter_mut().for_each(|v| *v /= z);
    Ok(p)
}

/// Evaluates a log-density at every grid point.
pub fn tabulate<E, F: FnMut(&[f64]) -> Result<f64, E>>(grid: &Grid2, mut f: F) -> Result<Vec<f64>, E> {
    let mut out = Vec::with_capacity(grid.len());
    for i in 0..grid.nx {
        for j in 0..grid.ny {
            out.push(f(&[grid.x(i), grid.y(j)])?);
        }
    }
    Ok(out)
}

/// Pointwise posterior moments of `q(t)` with batch-means standard errors.
#[derive(Debug, Clone, PartialEq)]
pub struct FluxMoments {
    pub times: Vec<f64>,
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
    pub skewness: Vec<f64>,
    pub mean_se: Vec<f64>,
    pub variance_se: Vec<f64>,
    pub skewness_se: Vec<f64>,
    /// Row-major `n_t x n_t`.
    pub autocovariance: Vec<f64>,
}

/// Flux moments from coefficient samples (row-major, `dim` columns).
/// Standard errors come from `batches` contiguous batches, so correlated
/// chains are handled.
pub fn flux_moments(
    coeffs: &[f64],
    dim: usize,
    times: &[f64],
    period: f64,
    batches: usize,
) -> Result<FluxMoments, AnalysisError> {
    let n = coeffs.len() / dim;
    if n < 2 || n < batches {
        return Err(AnalysisError::TooFewSamples { needed: batches.max(2), found: n });
    }
    let nt = times.len();
    // Flux curves, time-major so each time point is contiguous.
    let mut curves = vec![0.0; nt * n];
    for (s, row) in coeffs.chunks_exact(dim).enumerate() {
        for (t, &time) in times.iter().enumerate() {
            curves[t * n + s] = flux_eval(row, time, period);
        }
    }
    let series = |t: usize| &curves[t * n..(t + 1) * n];
    let mut mean = Vec::with_capacity(nt);
    let mut variance = Vec::with_capacity(nt);
    let mut skewness = Vec::with_capacity(nt);
    let mut mean_se = Vec::with_capacity(nt);
    let mut variance_se = Vec::with_capacity(nt);
    let mut skewness_se = Vec::with_capacity(nt);
    let batches = batches.max(2);
    let size = n / batches;
    let batch_se = |x: &[f64], stat: &dyn Fn(&[f64]) -> f64| -> f64 {
        let vals: Vec<f64> = x.chunks_exact(size).take(batches).map(stat).collect();
        (stats::sample_variance(&vals) / batches as f64).sqrt()
    };
    for t in 0..nt {
        let x = series(t);
        mean.push(stats::mean(x));
        variance.push(stats::variance(x));
        skewness.push(stats::skewness(x));
        mean_se.push(batch_se(x, &stats::mean));
        variance_se.push(batch_se(x, &stats::variance));
        skewness_se.push(batch_se(x, &stats::skewness));
    }
    let mut autocovariance = vec![0.0; nt * nt];
    for a in 0..nt {
        let xa = series(a);
        for b in a..nt {
            let xb = series(b);
            let c = xa
                .iter()
                .zip(xb)
                .map(|(u, v)| (u - mean[a]) * (v - mean[b]))
                .sum::<f64>()
                / n as f64;
            autocovariance[a * nt + b] = c;
            autocovariance[b * nt + a] = c;
        }
        // Keep the diagonal identical to the reported variance.
        autocovariance[a * nt + a] = variance[a];
    }
    Ok(FluxMoments {
        times: times.to_vec(),
        mean,
        variance,
        skewness,
        mean_se,
        variance_se,
        skewness_se,
        autocovariance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn grid_integration_is_exact_for_bilinear() {
        let g = Grid2::new((0.0, 2.0), (-1.0, 1.0), 11, 21);
        let vals = tabulate::<(), _>(&g, |p| Ok(1.0 + p[0] + 2.0 * p[1])).unwrap();
        assert_relative_eq!(g.integrate(&vals), 2.0 * 2.0 + 2.0 * 2.0, epsilon = 1e-12);
    }

    #[test]
    fn binned_kde_matches_direct_sum() {
        let xs: Vec<f64> = (0..400).map(|k| (k as f64 * 1.7).sin() + 0.3 * (k as f64 * 0.37).cos()).collect();
        let ys: Vec<f64> = (0..400).map(|k| 0.5 * (k as f64 * 2.3).cos() - 0.2 * xs[k]).collect();
        let h = (0.25, 0.15);
        let g = Grid2::new((-2.5, 2.5), (-1.5, 1.5), 201, 121);
        let kde = kde2_with_bandwidth(&xs, &ys, &g, h);
        let mut worst: f64 = 0.0;
        let mut peak: f64 = 0.0;
        for i in (0..g.nx).step_by(5) {
            for j in (0..g.ny).step_by(5) {
                let direct = xs
                    .iter()
                    .zip(&ys)
                    .map(|(x, y)| {
                        let (u, v) = ((g.x(i) - x) / h.0, (g.y(j) - y) / h.1);
                        (-0.5 * (u * u + v * v)).exp() / (2.0 * PI * h.0 * h.1)
                    })
                    .sum::<f64>()
                    / xs.len() as f64;
                worst = worst.max((kde.density[i * g.ny + j] - direct).abs());
                peak = peak.max(direct);
            }
        }
        // Binning error is second order in dx / h (0.1 and 0.17 here).
        assert!(worst < 5e-3 * peak, "{worst} vs peak {peak}");
    }

    #[test]
    fn normalized_log_density_integrates_to_one() {
        let g = Grid2::new((0.0, 1.0), (0.0, 1.0), 51, 51);
        let ln = tabulate::<(), _>(&g, |p| Ok(-500.0 - 10.0 * (p[0] - 0.3).powi(2))).unwrap();
        let p = normalize_log_density(&g, &ln).unwrap();
        assert_relative_eq!(g.integrate(&p), 1.0, epsilon = 1e-12);
        assert_eq!(kl_divergence_grid(&g, &p, &p).unwrap(), 0.0);
    }

    #[test]
    fn identical_flux_samples_have_zero_spread() {
        let row = [0.5, 1.0, -1.0, 0.2, 0.0];
        let coeffs: Vec<f64> = row.repeat(1000);
        let times: Vec<f64> = (1..=10).map(|i| i as f64 / 10.0).collect();
        let m = flux_moments(&coeffs, 5, &times, 1.0, 20).unwrap();
        for (t, &time) in times.iter().enumerate() {
            assert_relative_eq!(m.mean[t], flux_eval(&row, time, 1.0), epsilon = 1e-12);
            assert!(m.variance[t].abs() < 1e-24);
        }
        assert!(m.autocovariance.iter().all(|v| v.abs() < 1e-24));
    }

    #[test]
    fn too_few_samples() {
        let g = Grid2::new((0.0, 1.0), (0.0, 1.0), 10, 10);
        assert!(matches!(kde2(&[0.0; 10], &[0.0; 10], &g), Err(AnalysisError::TooFewSamples { .. })));
        let xs: Vec<f64> = (0..200).map(|i| i as f64).collect();
        assert_eq!(kde2(&xs, &[1.0; 200], &g), Err(AnalysisError::ZeroVariance(1)));
    }
}
