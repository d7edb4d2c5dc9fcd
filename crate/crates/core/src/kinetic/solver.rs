use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{DensityField, Grid};

use super::KineticModel;

/// Negative values above this are treated as round-off and clamped to zero.
pub const NEGATIVITY_TOLERANCE: f64 = -1e-13;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Rk4,
    Picard,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    pub dt: f64,
    pub t_end: f64,
    pub method: Method,
    #[serde(default = "default_picard_tolerance")]
    pub picard_tolerance: f64,
    #[serde(default = "default_picard_max_iter")]
    pub picard_max_iter: usize,
}

fn default_picard_tolerance() -> f64 {
    1e-12
}

fn default_picard_max_iter() -> usize {
    200
}

impl SolverConfig {
    pub fn rk4(dt: f64, t_end: f64) -> Self {
        SolverConfig {
            dt,
            t_end,
            method: Method::Rk4,
            picard_tolerance: default_picard_tolerance(),
            picard_max_iter: default_picard_max_iter(),
        }
    }

    pub fn picard(dt: f64, t_end: f64, tolerance: f64, max_iter: usize) -> Self {
        SolverConfig {
            dt,
            t_end,
            method: Method::Picard,
            picard_tolerance: tolerance,
            picard_max_iter: max_iter,
        }
    }

    /// Checks `0 < dt <= 0.1 / alpha` and a non-negative horizon.
    pub fn validate(&self, alpha: f64) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::InvalidInput(format!("dt must be positive, got {}", self.dt)));
        }
        if self.dt > 0.1 / alpha {
            return Err(Error::InvalidInput(format!(
                "dt = {} exceeds the stability guard 0.1 / alpha = {}",
                self.dt,
                0.1 / alpha
            )));
        }
        if !(self.t_end.is_finite() && self.t_end >= 0.0) {
            return Err(Error::InvalidInput(format!("t_end must be non-negative, got {}", self.t_end)));
        }
        if self.method == Method::Picard && !(self.picard_tolerance > 0.0 && self.picard_max_iter > 0) {
            return Err(Error::InvalidInput("picard needs a positive tolerance and iteration cap".into()));
        }
        Ok(())
    }

    /// Number of uniform steps covering `[0, t_end]`; the step is shrunk so it divides `t_end`.
    pub fn steps(&self) -> usize {
        if self.t_end == 0.0 {
            0
        } else {
            ((self.t_end / self.dt) - 1e-9).ceil().max(1.0) as usize
        }
    }
}

/// Density values at a sequence of times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KineticTrajectory {
    pub grid: Grid,
    pub times: Vec<f64>,
    pub values: Vec<Vec<f64>>,
}

impl KineticTrajectory {
    pub fn last(&self) -> &[f64] {
        self.values.last().expect("trajectory holds the initial state")
    }

    /// Largest pointwise difference over all shared time points.
    pub fn sup_distance(&self, other: &KineticTrajectory) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()))
            .fold(0.0, f64::max)
    }

    pub fn mass(&self, index: usize) -> f64 {
        self.values[index].iter().sum::<f64>() * self.grid.cell_volume()
    }

    pub fn field(&self, index: usize) -> Result<DensityField> {
        DensityField::new(self.grid, self.values[index].clone())
    }
}

fn axpy(base: &[f64], scale: f64, dir: &[f64]) -> Vec<f64> {
    base.iter().zip(dir).map(|(b, d)| b + scale * d).collect()
}

/// One classical fourth-order Runge-Kutta step.
pub fn step_rk4(model: &KineticModel, rho: &[f64], dt: f64) -> Result<Vec<f64>> {
    let k1 = model.rhs(rho);
    let k2 = model.rhs(&axpy(rho, 0.5 * dt, &k1));
    let k3 = model.rhs(&axpy(rho, 0.5 * dt, &k2));
    let k4 = model.rhs(&axpy(rho, dt, &k3));
    let mut next: Vec<f64> = (0..rho.len())
        .map(|i| rho[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect();
    for (cell, v) in next.iter_mut().enumerate() {
        if *v < 0.0 {
            if *v < NEGATIVITY_TOLERANCE {
                return Err(Error::StepSize { value: *v, cell });
            }
            *v = 0.0;
        }
    }
    Ok(next)
}

/// Integrates with RK4, storing every `store_every`-th step plus the final state.
pub fn solve_rk4(model: &KineticModel, rho0: &DensityField, config: &SolverConfig, store_every: usize) -> Result<KineticTrajectory> {
    config.validate(model.alpha())?;
    check_grid(model, rho0)?;
    let steps = config.steps();
    let dt = if steps == 0 { 0.0 } else { config.t_end / steps as f64 };
    let store_every = store_every.max(1);
    let mut traj = KineticTrajectory {
        grid: *model.grid(),
        times: vec![0.0],
        values: vec![rho0.values().to_vec()],
    };
    let mut rho = rho0.values().to_vec();
    for k in 1..=steps {
        rho = step_rk4(model, &rho, dt)?;
        if k % store_every == 0 || k == steps {
            traj.times.push(k as f64 * dt);
            traj.values.push(rho.clone());
        }
    }
    Ok(traj)
}

/// Dispatches on `config.method`; Picard stores every time-grid point.
pub fn solve(model: &KineticModel, rho0: &DensityField, config: &SolverConfig) -> Result<KineticTrajectory> {
    match config.method {
        Method::Rk4 => solve_rk4(model, rho0, config, 1),
        Method::Picard => super::picard_solve(model, rho0, config).map(|s| s.trajectory),
    }
}

pub(super) fn check_grid(model: &KineticModel, rho0: &DensityField) -> Result<()> {
    if rho0.grid() != model.grid() {
        return Err(Error::InvalidInput("initial density lives on a different grid than the model".into()));
    }
    Ok(())
}
