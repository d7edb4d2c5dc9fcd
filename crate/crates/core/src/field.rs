//! Gridded densities on the torus.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Point, Torus, MAX_DIM};

/// Uniform grid with `n_cells` cells per axis, flattened row-major
/// (the last axis varies fastest).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub torus: Torus,
    pub n_cells: usize,
}

impl Grid {
    pub fn new(torus: Torus, n_cells: usize) -> Result<Self> {
        torus.validate()?;
        if n_cells == 0 {
            return Err(Error::InvalidInput("grid needs at least one cell per axis".into()));
        }
        Ok(Grid { torus, n_cells })
    }

    pub fn dim(&self) -> usize {
        self.torus.dim
    }

    pub fn spacing(&self) -> f64 {
        self.torus.length / self.n_cells as f64
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim() as i32)
    }

    pub fn len(&self) -> usize {
        self.n_cells.pow(self.dim() as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn multi_index(&self, mut flat: usize) -> [usize; MAX_DIM] {
        let mut idx = [0; MAX_DIM];
        for k in (0..self.dim()).rev() {
            idx[k] = flat % self.n_cells;
            flat /= self.n_cells;
        }
        idx
    }

    pub fn flat_index(&self, idx: &[usize; MAX_DIM]) -> usize {
        (0..self.dim()).fold(0, |acc, k| acc * self.n_cells + idx[k])
    }

    /// Flat index of `base + offset` with periodic wrap-around.
    pub fn shifted(&self, base: &[usize; MAX_DIM], offset: &[i64; MAX_DIM]) -> usize {
        let n = self.n_cells as i64;
        (0..self.dim()).fold(0, |acc, k| {
            acc * self.n_cells + (base[k] as i64 + offset[k]).rem_euclid(n) as usize
        })
    }

    pub fn cell_center(&self, flat: usize) -> Point {
        let idx = self.multi_index(flat);
        let h = self.spacing();
        let mut p = [0.0; MAX_DIM];
        for k in 0..self.dim() {
            p[k] = (idx[k] as f64 + 0.5) * h;
        }
        p
    }

    /// Cell containing `p` (assumed already wrapped).
    pub fn cell_of(&self, p: &Point) -> usize {
        let h = self.spacing();
        let mut idx = [0; MAX_DIM];
        for k in 0..self.dim() {
            idx[k] = ((p[k] / h) as usize).min(self.n_cells - 1);
        }
        self.flat_index(&idx)
    }
}

/// A non-negative density sampled at cell centres.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityField {
    grid: Grid,
    values: Vec<f64>,
}

impl DensityField {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidInput(format!(
                "density has {} values but the grid has {} cells",
                values.len(),
                grid.len()
            )));
        }
        if let Some((i, v)) = values.iter().enumerate().find(|(_, v)| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::InvalidInput(format!("density value {v} in cell {i} is not a non-negative number")));
        }
        Ok(DensityField { grid, values })
    }

    pub fn constant(grid: Grid, value: f64) -> Result<Self> {
        Self::new(grid, vec![value; grid.len()])
    }

    pub fn from_fn<F: Fn(&Point) -> f64>(grid: Grid, f: F) -> Result<Self> {
        let values = (0..grid.len()).map(|i| f(&grid.cell_center(i))).collect();
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// `∫ rho` as the cell sum times the cell volume.
    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_volume()
    }

    pub fn sup(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.grid, self.values.iter().map(|v| v * factor).collect())
    }
}
