//! 1D nonlinear inverse heat conduction:
//! `u_t = (c(u) u_x)_x` on `[0, L]`, `u_x(0, t) = q(t)`, `u_x(L, t) = 0`,
//! `u(x, 0) = 0`, with `c(u) = 1 / (1 + u^2)` and `q` a truncated Fourier
//! series. Observables are `u(x_s, t_i)` at equally spaced times.
//!
//! Finite-volume form of second-order central differences on a vertex grid
//! (half cells at the ends), two-step backward differentiation (BDF2) in time
//! started by one backward-Euler step, and lagged-coefficient (Picard)
//! iteration for the conductivity inside each step. The discrete rate of
//! change of the trapezoid-weighted heat content equals the boundary flux
//! `-c(u_0) q` exactly.

#[allow(unused_imports)] // inherent when std is linked
use num_traits::Float as _;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use super::{check_dim, EvalCounter, ForwardModel, ModelError};
use crate::linalg::solve_tridiagonal;

/// Fourier flux `q(t) = a_0 + sum_j a_j cos(2 j pi t / T) + b_j sin(2 j pi t / T)`
/// with `coeffs = (a_0, a_1..a_nf, b_1..b_nf)`.
pub fn flux_eval(coeffs: &[f64], t: f64, period: f64) -> f64 {
    let modes = coeffs.len().saturating_sub(1) / 2;
    let mut q = coeffs.first().copied().unwrap_or(0.0);
    for j in 1..=modes {
        let arg = 2.0 * j as f64 * PI * t / period;
        q += coeffs[j] * arg.cos() + coeffs[modes + j] * arg.sin();
    }
    q
}

/// Values of the flux basis functions `(1, cos.., sin..)` at `t`.
pub fn flux_basis(modes: usize, t: f64, period: f64, out: &mut [f64]) {
    out[0] = 1.0;
    for j in 1..=modes {
        let arg = 2.0 * j as f64 * PI * t / period;
        out[j] = arg.cos();
        out[modes + j] = arg.sin();
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Conductivity {
    /// `c(u) = 1 / (1 + u^2)`.
    Nonlinear,
    /// Constant conductivity, for linear reference solutions.
    Constant(f64),
}

impl Conductivity {
    #[inline]
    fn at(self, u: f64) -> f64 {
        match self {
            Conductivity::Nonlinear => 1.0 / (1.0 + u * u),
            Conductivity::Constant(c) => c,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeatModelConfig {
    pub length: f64,
    pub horizon: f64,
    pub sensor: f64,
    /// Observations at `t_i = i T / n`, `i = 1..=n`.
    pub n_measurements: usize,
    pub fourier_modes: usize,
    pub mesh_nodes: usize,
    pub dt: f64,
    pub conductivity: Conductivity,
    pub picard_tolerance: f64,
    pub max_picard_iterations: usize,
}

impl Default for HeatModelConfig {
    fn default() -> Self {
        HeatModelConfig {
            length: 1.0,
            horizon: 1.0,
            sensor: 0.4,
            n_measurements: 50,
            fourier_modes: 4,
            mesh_nodes: 101,
            dt: 1e-3,
            conductivity: Conductivity::Nonlinear,
            picard_tolerance: 1e-8,
            max_picard_iterations: 100,
        }
    }
}

impl HeatModelConfig {
    /// Same problem on a mesh and step refined by `factor`.
    pub fn refined(&self, factor: usize) -> Self {
        HeatModelConfig {
            mesh_nodes: (self.mesh_nodes - 1) * factor + 1,
            dt: self.dt / factor as f64,
            ..self.clone()
        }
    }

    pub fn parameter_dim(&self) -> usize {
        2 * self.fourier_modes + 1
    }

    pub fn measurement_times(&self) -> Vec<f64> {
        (1..=self.n_measurements)
            .map(|i| i as f64 * self.horizon / self.n_measurements as f64)
            .collect()
    }

    fn validate(&self) -> Result<(), ModelError> {
        if !(self.length > 0.0 && self.horizon > 0.0) {
            return Err(ModelError::InvalidConfig("length and horizon must be positive"));
        }
        if !(self.sensor > 0.0 && self.sensor < self.length) {
            return Err(ModelError::InvalidConfig("sensor must lie strictly inside the domain"));
        }
        if self.mesh_nodes < 3 || !(self.dt > 0.0) || self.n_measurements == 0 {
            return Err(ModelError::InvalidConfig("need >= 3 nodes, dt > 0 and at least one measurement"));
        }
        if !(self.picard_tolerance > 0.0) || self.max_picard_iterations == 0 {
            return Err(ModelError::InvalidConfig("invalid Picard iteration settings"));
        }
        Ok(())
    }
}

/// Reusable solver workspace.
#[derive(Debug, Default, Clone)]
struct Workspace {
    lower: Vec<f64>,
    diag: Vec<f64>,
    upper: Vec<f64>,
    rhs: Vec<f64>,
    scratch: Vec<f64>,
}

/// State after a full forward solve, for diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct HeatTrajectory {
    pub readings: Vec<f64>,
    /// Trapezoid heat content `sum_i w_i h u_i` after each step.
    pub heat_content: Vec<f64>,
    /// Boundary flux term `-c(u_0) q` used in each step. It matches the
    /// backward-Euler difference of `heat_content` on the first step and the
    /// BDF2 difference afterwards.
    pub boundary_flux: Vec<f64>,
    pub final_field: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct HeatModel {
    config: HeatModelConfig,
    counter: EvalCounter,
}

impl HeatModel {
    pub fn new(config: HeatModelConfig) -> Result<Self, ModelError> {
        config.validate()?;
        Ok(HeatModel { config, counter: EvalCounter::new() })
    }

    pub fn config(&self) -> &HeatModelConfig {
        &self.config
    }

    /// Runs the solver and records conservation diagnostics. Does not touch
    /// the evaluation counter.
    pub fn trajectory(&self, coeffs: &[f64]) -> Result<HeatTrajectory, ModelError> {
        self.solve(coeffs, true)
    }

    fn solve(&self, coeffs: &[f64], record: bool) -> Result<HeatTrajectory, ModelError> {
        let cfg = &self.config;
        let n = cfg.mesh_nodes;
        let h = cfg.length / (n - 1) as f64;
        let dt = cfg.dt;
        let steps = (cfg.horizon / dt - 1e-9).ceil() as usize;
        let times = cfg.measurement_times();

        let sensor_pos = cfg.sensor / h;
        let sensor_left = (sensor_pos.floor() as usize).min(n - 2);
        let sensor_frac = sensor_pos - sensor_left as f64;
        let read = |u: &[f64]| (1.0 - sensor_frac) * u[sensor_left] + sensor_frac * u[sensor_left + 1];

        let mut u = vec![0.0; n];
        let mut u_prev = vec![0.0; n];
        let mut iterate = vec![0.0; n];
        let mut ws = Workspace {
            lower: vec![0.0; n],
            diag: vec![0.0; n],
            upper: vec![0.0; n],
            rhs: vec![0.0; n],
            scratch: Vec::with_capacity(n),
        };
        let mut readings = Vec::with_capacity(times.len());
        let mut next_time = 0;
        let mut prev_reading = read(&u);
        let mut heat_content = Vec::new();
        let mut boundary_flux = Vec::new();
        let content = |u: &[f64]| -> f64 {
            let inner: f64 = u[1..n - 1].iter().sum();
            h * (inner + 0.5 * (u[0] + u[n - 1]))
        };
        if record {
            heat_content.push(content(&u));
        }

        let half_cell = h / (2.0 * dt);
        let full_cell = h / dt;
        let linear = matches!(cfg.conductivity, Conductivity::Constant(_));
        for step in 1..=steps {
            let t_new = step as f64 * dt;
            let q = flux_eval(coeffs, t_new, cfg.horizon);
            let bdf2 = step > 1;
            let lead = if bdf2 { 1.5 } else { 1.0 };
            if bdf2 {
                for i in 0..n {
                    iterate[i] = 2.0 * u[i] - u_prev[i];
                }
            } else {
                iterate.copy_from_slice(&u);
            }
            let mut converged = false;
            let mut used_c0 = 0.0;
            for _ in 0..cfg.max_picard_iterations {
                let c0 = cfg.conductivity.at(iterate[0]);
                used_c0 = c0;
                let mut c_left = 0.0;
                for i in 0..n {
                    let c_right = if i + 1 < n {
                        cfg.conductivity.at(0.5 * (iterate[i] + iterate[i + 1])) / h
                    } else {
                        0.0
                    };
                    let mass = if i == 0 || i == n - 1 { half_cell } else { full_cell };
                    ws.lower[i] = -c_left;
                    ws.upper[i] = -c_right;
                    ws.diag[i] = lead * mass + c_left + c_right;
                    ws.rhs[i] = if bdf2 { mass * (2.0 * u[i] - 0.5 * u_prev[i]) } else { mass * u[i] };
                    c_left = c_right;
                }
                ws.rhs[0] -= c0 * q;
                solve_tridiagonal(&ws.lower, &ws.diag, &ws.upper, &mut ws.rhs, &mut ws.scratch);
                let mut change: f64 = 0.0;
                let mut scale: f64 = 0.0;
                for (old, new) in iterate.iter().zip(&ws.rhs) {
                    change = change.max((old - new).abs());
                    scale = scale.max(new.abs());
                }
                iterate.copy_from_slice(&ws.rhs);
                if !change.is_finite() {
                    break;
                }
                if linear || change <= cfg.picard_tolerance * (1.0 + scale) {
                    converged = true;
                    break;
                }
            }
            if !converged {
                return Err(ModelError::SolverDivergence {
                    time: t_new,
                    iterations: cfg.max_picard_iterations,
                    mesh_nodes: n,
                    dt,
                });
            }
            core::mem::swap(&mut u_prev, &mut u);
            core::mem::swap(&mut u, &mut iterate);
            if record {
                heat_content.push(content(&u));
                boundary_flux.push(-used_c0 * q);
            }

            let reading = read(&u);
            let t_old = t_new - dt;
            while next_time < times.len() && times[next_time] <= t_new + 1e-12 {
                let frac = ((times[next_time] - t_old) / dt).clamp(0.0, 1.0);
                readings.push((1.0 - frac) * prev_reading + frac * reading);
                next_time += 1;
            }
            prev_reading = reading;
        }
        while readings.len() < times.len() {
            readings.push(prev_reading);
        }
        if readings.iter().any(|v| !v.is_finite()) {
            return Err(ModelError::NonFinite);
        }
        Ok(HeatTrajectory { readings, heat_content, boundary_flux, final_field: u })
    }
}

impl ForwardModel for HeatModel {
    fn input_dim(&self) -> usize {
        self.config.parameter_dim()
    }

    fn output_dim(&self) -> usize {
        self.config.n_measurements
    }

    fn evaluate(&self, y: &[f64]) -> Result<Vec<f64>, ModelError> {
        self.counter.bump();
        check_dim(self.config.parameter_dim(), y)?;
        if !y.iter().all(|v| v.is_finite()) {
            return Err(ModelError::NonFinite);
        }
        Ok(self.solve(y, false)?.readings)
    }

    fn evaluation_count(&self) -> u64 {
        self.counter.get()
    }
}
