//! Contaminant source inversion: `u_t = lap(u) + s(x, t)` on `[0, 1]^2`,
//! homogeneous Neumann walls, zero initial state, and a Gaussian release
//! of known strength and width active on `[0, tau]`.
//!
//! Space is discretized with second-order central differences on an
//! `n x n` vertex grid (ghost-node Neumann closure). The discrete Neumann
//! Laplacian is diagonalized by the cosine modes `cos(k pi i / (n - 1))`,
//! which are orthogonal under trapezoid weights, and the semi-discrete system
//! is integrated exactly in time mode by mode, so there is no time step.
//! Since the source is a separable Gaussian, its modal coefficients factor
//! into two 1D transforms and one evaluation costs `O(n^2)`.

#[allow(unused_imports)] // inherent when std is linked
use num_traits::Float as _;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use super::{check_dim, EvalCounter, ForwardModel, ModelError};

#[derive(Debug, Clone, PartialEq)]
pub struct SourceModelConfig {
    /// Total release strength `s`.
    pub strength: f64,
    /// Gaussian width `h`.
    pub width: f64,
    /// Release end time `tau`.
    pub release_end: f64,
    /// Sensors form a uniform `k x k` grid covering the unit square.
    pub sensors_per_side: usize,
    pub measurement_times: Vec<f64>,
    /// Grid nodes per side.
    pub mesh_nodes: usize,
}

impl Default for SourceModelConfig {
    fn default() -> Self {
        SourceModelConfig {
            strength: 2.0,
            width: 0.05,
            release_end: 0.3,
            sensors_per_side: 3,
            measurement_times: vec![0.1, 0.2],
            mesh_nodes: 51,
        }
    }
}

impl SourceModelConfig {
    /// Same problem on a mesh refined by `factor`.
    pub fn refined(&self, factor: usize) -> Self {
        SourceModelConfig {
            mesh_nodes: (self.mesh_nodes - 1) * factor + 1,
            ..self.clone()
        }
    }

    pub fn sensor_positions(&self) -> Vec<f64> {
        let k = self.sensors_per_side;
        if k == 1 {
            return vec![0.5];
        }
        (0..k).map(|i| i as f64 / (k - 1) as f64).collect()
    }

    fn validate(&self) -> Result<(), ModelError> {
        if !(self.width > 0.0) {
            return Err(ModelError::InvalidConfig("source width must be positive"));
        }
        if !(self.release_end > 0.0) {
            return Err(ModelError::InvalidConfig("release end time must be positive"));
        }
        if self.mesh_nodes < 3 {
            return Err(ModelError::InvalidConfig("need at least 3 mesh nodes per side"));
        }
        if self.sensors_per_side == 0 || self.measurement_times.is_empty() {
            return Err(ModelError::InvalidConfig("need at least one sensor and one measurement time"));
        }
        for &t in &self.measurement_times {
            if !(t > 0.0 && t.is_finite()) {
                return Err(ModelError::InvalidConfig("measurement times must be positive"));
            }
        }
        Ok(())
    }
}

/// Discrete Neumann eigen-structure of one axis.
#[derive(Debug, Clone)]
struct Axis {
    n: usize,
    /// Trapezoid weights (dimensionless, 1/2 at the ends).
    trap: Vec<f64>,
    /// `cos(k pi i / (n - 1))` stored at `[k * n + i]`.
    modes: Vec<f64>,
    norms: Vec<f64>,
    eigenvalues: Vec<f64>,
}

impl Axis {
    fn new(n: usize) -> Self {
        let m = (n - 1) as f64;
        let h = 1.0 / m;
        let mut trap = vec![1.0; n];
        trap[0] = 0.5;
        trap[n - 1] = 0.5;
        let mut modes = vec![0.0; n * n];
        for k in 0..n {
            for i in 0..n {
                modes[k * n + i] = ((k * i) as f64 * PI / m).cos();
            }
        }
        let norms = (0..n)
            .map(|k| (0..n).map(|i| trap[i] * modes[k * n + i] * modes[k * n + i]).sum())
            .collect();
        let eigenvalues = (0..n)
            .map(|k| {
                let s = (k as f64 * PI / (2.0 * m)).sin();
                -4.0 / (h * h) * s * s
            })
            .collect();
        Axis { n, trap, modes, norms, eigenvalues }
    }

    fn x(&self, i: usize) -> f64 {
        i as f64 / (self.n - 1) as f64
    }

    /// Modal coefficients of grid values `f`.
    fn forward(&self, f: &[f64], out: &mut [f64]) {
        for k in 0..self.n {
            let row = &self.modes[k * self.n..(k + 1) * self.n];
            let mut acc = 0.0;
            for i in 0..self.n {
                acc += self.trap[i] * f[i] * row[i];
            }
            out[k] = acc / self.norms[k];
        }
    }

    /// Mode values at a point via linear interpolation between grid nodes.
    fn probe(&self, x: f64) -> Vec<f64> {
        let m = (self.n - 1) as f64;
        let s = (x.clamp(0.0, 1.0) * m).min(m);
        let left = (s.floor() as usize).min(self.n - 2);
        let frac = s - left as f64;
        (0..self.n)
            .map(|k| {
                let row = &self.modes[k * self.n..(k + 1) * self.n];
                (1.0 - frac) * row[left] + frac * row[left + 1]
            })
            .collect()
    }
}

/// Response at time `t` of the mode `a' = lambda a + f` to unit forcing
/// active on `[0, tau]`.
fn time_factor(lambda: f64, t: f64, tau: f64) -> f64 {
    let on = t.min(tau);
    if on <= 0.0 {
        return 0.0;
    }
    if lambda == 0.0 {
        return on;
    }
    (lambda * (t - on)).exp() * (lambda * on).exp_m1() / lambda
}

/// The source-inversion forward model: source location `(x_1, x_2)` to
/// sensor readings. Output index is `sensor * n_times + time`, sensors
/// numbered `i * k + j` for the sensor at `(p_i, p_j)`.
#[derive(Debug, Clone)]
pub struct SourceModel {
    config: SourceModelConfig,
    axis: Axis,
    /// Per measurement time, `n x n` modal factors `[k * n + l]`.
    factors: Vec<Vec<f64>>,
    /// Per sensor coordinate, interpolated mode values.
    probes: Vec<Vec<f64>>,
    counter: EvalCounter,
}

impl SourceModel {
    pub fn new(config: SourceModelConfig) -> Result<Self, ModelError> {
        config.validate()?;
        let axis = Axis::new(config.mesh_nodes);
        let n = axis.n;
        let factors = config
            .measurement_times
            .iter()
            .map(|&t| {
                let mut f = vec![0.0; n * n];
                for k in 0..n {
                    for l in 0..n {
                        let lambda = axis.eigenvalues[k] + axis.eigenvalues[l];
                        f[k * n + l] = time_factor(lambda, t, config.release_end);
                    }
                }
                f
            })
            .collect();
        let probes = config.sensor_positions().iter().map(|&p| axis.probe(p)).collect();
        Ok(SourceModel { config, axis, factors, probes, counter: EvalCounter::new() })
    }

    pub fn config(&self) -> &SourceModelConfig {
        &self.config
    }

    fn source_modes(&self, location: &[f64]) -> (Vec<f64>, Vec<f64>, f64) {
        let n = self.axis.n;
        let w = self.config.width;
        let mut gx = vec![0.0; n];
        let mut gy = vec![0.0; n];
        for i in 0..n {
            let x = self.axis.x(i);
            gx[i] = (-(x - location[0]).powi(2) / (2.0 * w * w)).exp();
            gy[i] = (-(x - location[1]).powi(2) / (2.0 * w * w)).exp();
        }
        let mut hx = vec![0.0; n];
        let mut hy = vec![0.0; n];
        self.axis.forward(&gx, &mut hx);
        self.axis.forward(&gy, &mut hy);
        let amplitude = self.config.strength / (2.0 * PI * w * w);
        (hx, hy, amplitude)
    }

    /// Full grid solution at time `t`, row-major with the first coordinate
    /// slowest.
    pub fn field_at(&self, location: &[f64], t: f64) -> Result<Vec<f64>, ModelError> {
        check_dim(2, location)?;
        let n = self.axis.n;
        let (hx, hy, amplitude) = self.source_modes(location);
        let mut coeff = vec![0.0; n * n];
        for k in 0..n {
            for l in 0..n {
                let lambda = self.axis.eigenvalues[k] + self.axis.eigenvalues[l];
                coeff[k * n + l] =
                    amplitude * hx[k] * hy[l] * time_factor(lambda, t, self.config.release_end);
            }
        }
        // Inverse transform, one axis at a time.
        let mut partial = vec![0.0; n * n];
        for k in 0..n {
            for j in 0..n {
                let mut acc = 0.0;
                for l in 0..n {
                    acc += coeff[k * n + l] * self.axis.modes[l * n + j];
                }
                partial[k * n + j] = acc;
            }
        }
        let mut field = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                let mut acc = 0.0;
                for k in 0..n {
                    acc += self.axis.modes[k * n + i] * partial[k * n + j];
                }
                field[i * n + j] = acc;
            }
        }
        Ok(field)
    }

    /// Trapezoid-rule integral of a grid field over the unit square.
    pub fn integrate_field(&self, field: &[f64]) -> f64 {
        let n = self.axis.n;
        let h = 1.0 / (n - 1) as f64;
        let mut total = 0.0;
        for i in 0..n {
            for j in 0..n {
                total += self.axis.trap[i] * self.axis.trap[j] * field[i * n + j];
            }
        }
        total * h * h
    }
}

impl ForwardModel for SourceModel {
    fn input_dim(&self) -> usize {
        2
    }

    fn output_dim(&self) -> usize {
        self.probes.len() * self.probes.len() * self.factors.len()
    }

    fn evaluate(&self, y: &[f64]) -> Result<Vec<f64>, ModelError> {
        self.counter.bump();
        check_dim(2, y)?;
        if !y.iter().all(|v| v.is_finite()) {
            return Err(ModelError::NonFinite);
        }
        let n = self.axis.n;
        let k_side = self.probes.len();
        let n_times = self.factors.len();
        let (hx, hy, amplitude) = self.source_modes(y);

        let mut out = vec![0.0; k_side * k_side * n_times];
        let mut column = vec![0.0; n];
        let mut weighted_x = vec![0.0; n];
        for (t, factors) in self.factors.iter().enumerate() {
            for (j, probe_y) in self.probes.iter().enumerate() {
                for l in 0..n {
                    column[l] = hy[l] * probe_y[l];
                }
                // row[k] = sum_l F[k, l] * hy[l] * probe_y[l]
                for k in 0..n {
                    let f = &factors[k * n..(k + 1) * n];
                    weighted_x[k] = f.iter().zip(&column).map(|(a, b)| a * b).sum();
                }
                for (i, probe_x) in self.probes.iter().enumerate() {
                    let value: f64 = (0..n).map(|k| hx[k] * probe_x[k] * weighted_x[k]).sum();
                    out[(i * k_side + j) * n_times + t] = amplitude * value;
                }
            }
        }
        Ok(out)
    }

    fn evaluation_count(&self) -> u64 {
        self.counter.get()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn zero_strength_gives_zero_readings() {
        let model = SourceModel::new(SourceModelConfig { strength: 0.0, ..Default::default() }).unwrap();
        let out = model.evaluate(&[0.3, 0.7]).unwrap();
        assert_eq!(out.len(), 18);
        assert!(out.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn mass_is_conserved_after_release() {
        let config = SourceModelConfig { release_end: 0.05, ..Default::default() };
        let model = SourceModel::new(config).unwrap();
        let field = model.field_at(&[0.5, 0.5], 0.2).unwrap();
        let mass = model.integrate_field(&field);
        assert!((mass - 2.0 * 0.05).abs() < 1e-3, "mass {mass}");
    }

    #[test]
    fn readings_match_field_at_sensor_nodes() {
        let model = SourceModel::new(SourceModelConfig::default()).unwrap();
        let out = model.evaluate(&[0.25, 0.6]).unwrap();
        let field = model.field_at(&[0.25, 0.6], 0.2).unwrap();
        let n = 51;
        // Sensor (1, 2) sits at node (25, 50); time index 1 is t = 0.2.
        assert_relative_eq!(out[(3 + 2) * 2 + 1], field[25 * n + 50], max_relative = 1e-10);
    }

    #[test]
    fn rejects_bad_times() {
        let config = SourceModelConfig { measurement_times: vec![0.1, -0.2], ..Default::default() };
        assert!(SourceModel::new(config).is_err());
    }

    #[test]
    fn mode_response() {
        assert_eq!(time_factor(0.0, 0.2, 0.05), 0.05);
        assert_eq!(time_factor(0.0, 0.2, 0.3), 0.2);
        // a(t) = (1 - e^{-t}) for lambda = -1 while the source is on.
        assert_relative_eq!(time_factor(-1.0, 0.2, 0.3), 1.0 - (-0.2f64).exp(), max_relative = 1e-14);
        let after = time_factor(-1.0, 0.2, 0.1);
        assert_relative_eq!(after, (1.0 - (-0.1f64).exp()) * (-0.1f64).exp(), max_relative = 1e-14);
    }
}
