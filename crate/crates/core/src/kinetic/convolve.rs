//! Periodic convolution with a tabulated radial profile.

use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::field::Grid;
use crate::geometry::MAX_DIM;
use crate::kernels::RadialProfile;

/// Radial profile sampled on the grid, rescaled so that
/// `sum(weights) * h^d` equals the prescribed integral.
#[derive(Clone)]
pub struct GridKernel {
    grid: Grid,
    support: Vec<([i64; MAX_DIM], f64)>,
    integral: f64,
    spectral: Option<Spectral>,
}

#[derive(Clone)]
struct Spectral {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    transfer: Vec<Complex64>,
}

impl std::fmt::Debug for GridKernel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GridKernel")
            .field("n_cells", &self.grid.n_cells)
            .field("support", &self.support.len())
            .field("integral", &self.integral)
            .field("spectral", &self.spectral.is_some())
            .finish()
    }
}

impl GridKernel {
    pub fn new(profile: &RadialProfile, integral: f64, grid: Grid) -> Result<Self> {
        let h = grid.spacing();
        let dim = grid.dim();
        let radius = profile.effective_radius();
        if radius >= 0.5 * grid.torus.length {
            return Err(Error::InvalidGeometry {
                rule: "minimal-image ambiguity",
                detail: format!("effective radius {radius} >= L/2 = {}", 0.5 * grid.torus.length),
            });
        }
        let mut support = Vec::new();
        if profile.height() > 0.0 {
            let reach = (radius / h).floor() as i64;
            let span = (2 * reach + 1) as usize;
            let mut offset = [0i64; MAX_DIM];
            for code in 0..span.pow(dim as u32) {
                let mut c = code;
                for o in offset.iter_mut().take(dim) {
                    *o = (c % span) as i64 - reach;
                    c /= span;
                }
                let r = offset[..dim].iter().map(|&o| (o as f64 * h).powi(2)).sum::<f64>().sqrt();
                let w = profile.at_radius(r);
                if w > 0.0 {
                    support.push((offset, w));
                }
            }
            let raw: f64 = support.iter().map(|(_, w)| w).sum::<f64>() * grid.cell_volume();
            let factor = integral / raw;
            for (_, w) in support.iter_mut() {
                *w *= factor;
            }
        }
        let spectral = grid.n_cells.is_power_of_two().then(|| Spectral::new(&grid, &support));
        Ok(GridKernel {
            grid,
            support,
            integral,
            spectral,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Discrete integral `sum(weights) * h^d`.
    pub fn integral(&self) -> f64 {
        self.integral
    }

    /// Offsets (in cells) and kernel values of the tabulated support.
    pub fn support(&self) -> &[([i64; MAX_DIM], f64)] {
        &self.support
    }

    pub fn is_spectral(&self) -> bool {
        self.spectral.is_some()
    }

    /// `(k * g)_i = sum_j k_{i-j} g_j h^d`; spectral on power-of-two grids.
    pub fn apply(&self, values: &[f64]) -> Vec<f64> {
        match &self.spectral {
            Some(s) => s.apply(&self.grid, values),
            None => self.apply_direct(values),
        }
    }

    /// Direct minimal-image summation over the kernel support.
    pub fn apply_direct(&self, values: &[f64]) -> Vec<f64> {
        assert_eq!(values.len(), self.grid.len());
        let vol = self.grid.cell_volume();
        (0..self.grid.len())
            .map(|i| {
                let base = self.grid.multi_index(i);
                self.support
                    .iter()
                    .map(|(o, w)| w * values[self.grid.shifted(&base, o)])
                    .sum::<f64>()
                    * vol
            })
            .collect()
    }

    /// Spectral evaluation regardless of grid size.
    pub fn apply_spectral(&self, values: &[f64]) -> Vec<f64> {
        match &self.spectral {
            Some(s) => s.apply(&self.grid, values),
            None => Spectral::new(&self.grid, &self.support).apply(&self.grid, values),
        }
    }
}

impl Spectral {
    fn new(grid: &Grid, support: &[([i64; MAX_DIM], f64)]) -> Self {
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(grid.n_cells);
        let inverse = planner.plan_fft_inverse(grid.n_cells);
        let mut transfer = vec![Complex64::new(0.0, 0.0); grid.len()];
        let vol = grid.cell_volume();
        let origin = [0usize; MAX_DIM];
        for (o, w) in support {
            transfer[grid.shifted(&origin, o)].re += w * vol;
        }
        fft_nd(&mut transfer, grid, &forward);
        Spectral {
            forward,
            inverse,
            transfer,
        }
    }

    fn apply(&self, grid: &Grid, values: &[f64]) -> Vec<f64> {
        assert_eq!(values.len(), grid.len());
        let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        fft_nd(&mut buf, grid, &self.forward);
        for (b, t) in buf.iter_mut().zip(&self.transfer) {
            *b *= t;
        }
        fft_nd(&mut buf, grid, &self.inverse);
        let norm = 1.0 / grid.len() as f64;
        buf.iter().map(|c| c.re * norm).collect()
    }
}

/// Unnormalised d-dimensional transform, one axis at a time.
fn fft_nd(data: &mut [Complex64], grid: &Grid, fft: &Arc<dyn Fft<f64>>) {
    let n = grid.n_cells;
    let dim = grid.dim();
    let mut line = vec![Complex64::new(0.0, 0.0); n];
    let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    for axis in 0..dim {
        let stride = n.pow((dim - 1 - axis) as u32);
        let block = stride * n;
        for outer in (0..data.len()).step_by(block) {
            for inner in 0..stride {
                let start = outer + inner;
                for (k, v) in line.iter_mut().enumerate() {
                    *v = data[start + k * stride];
                }
                fft.process_with_scratch(&mut line, &mut scratch);
                for (k, v) in line.iter().enumerate() {
                    data[start + k * stride] = *v;
                }
            }
        }
    }
}
