//! Mean-field kinetic equation on the periodic grid:
//!
//! `d rho/dt = (a * rho) exp(-(phi * rho)) - rho (a * exp(-(phi * rho)))`.
//!
//! The convolutions use the renormalised tabulated kernels of [`GridKernel`],
//! so constants are stationary and mass is conserved up to round-off.

mod bounds;
mod convolve;
mod picard;
mod solver;
mod vlasov;

pub use bounds::{monitor_bounds, BoundCheck, BoundReport, BoundViolation};
pub use convolve::GridKernel;
pub use picard::{picard_solve, PicardSolution};
pub use solver::{solve, solve_rk4, step_rk4, KineticTrajectory, Method, SolverConfig, NEGATIVITY_TOLERANCE};
pub use vlasov::vlasov_first_order;

use crate::error::{Error, Result};
use crate::field::Grid;
use crate::kernels::{KernelSpec, PotentialSpec};

/// How `phi * rho` is evaluated.
#[derive(Debug, Clone)]
pub enum Interaction {
    None,
    Convolution(GridKernel),
    /// Contact repulsion `phi * rho = kappa rho`.
    Local(f64),
}

/// Discretised kinetic equation for one kernel/potential pair on one grid.
#[derive(Debug, Clone)]
pub struct KineticModel {
    grid: Grid,
    kernel: KernelSpec,
    potential: PotentialSpec,
    jump: GridKernel,
    interaction: Interaction,
}

impl KineticModel {
    pub fn new(kernel: KernelSpec, potential: PotentialSpec, grid: Grid) -> Result<Self> {
        if kernel.dim() != grid.dim() || potential.dim() != grid.dim() {
            return Err(Error::InvalidSpec(format!(
                "dimension mismatch: grid {}, kernel {}, potential {}",
                grid.dim(),
                kernel.dim(),
                potential.dim()
            )));
        }
        let jump = GridKernel::new(kernel.profile(), kernel.alpha(), grid)?;
        let interaction = if potential.is_zero() {
            Interaction::None
        } else if let Some(kappa) = potential.kappa() {
            Interaction::Local(kappa)
        } else {
            let profile = potential.profile().expect("radial potential");
            Interaction::Convolution(GridKernel::new(profile, potential.mean(), grid)?)
        };
        Ok(KineticModel {
            grid,
            kernel,
            potential,
            jump,
            interaction,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn potential(&self) -> &PotentialSpec {
        &self.potential
    }

    pub fn jump_kernel(&self) -> &GridKernel {
        &self.jump
    }

    pub fn interaction(&self) -> &Interaction {
        &self.interaction
    }

    pub fn alpha(&self) -> f64 {
        self.kernel.alpha()
    }

    /// `<phi>`, or `kappa` in the local case.
    pub fn mean_phi(&self) -> f64 {
        self.potential.mean()
    }

    pub fn is_local(&self) -> bool {
        matches!(self.interaction, Interaction::Local(_))
    }

    /// `phi * rho` (or `kappa rho`).
    pub fn interaction_field(&self, rho: &[f64]) -> Vec<f64> {
        match &self.interaction {
            Interaction::None => vec![0.0; rho.len()],
            Interaction::Convolution(k) => k.apply(rho),
            Interaction::Local(kappa) => rho.iter().map(|r| kappa * r).collect(),
        }
    }

    /// Right-hand side of the kinetic equation.
    pub fn rhs(&self, rho: &[f64]) -> Vec<f64> {
        let boltzmann: Vec<f64> = self.interaction_field(rho).iter().map(|p| (-p).exp()).collect();
        let gain = self.jump.apply(rho);
        let loss = self.jump.apply(&boltzmann);
        rho.iter()
            .zip(&gain)
            .zip(&boltzmann)
            .zip(&loss)
            .map(|(((r, g), b), l)| g * b - r * l)
            .collect()
    }

    /// Integrand of the mild (integral) form:
    /// `(a * rho) exp(-(phi * rho)) + rho (a * (1 - exp(-(phi * rho))))`.
    pub fn mild_integrand(&self, rho: &[f64]) -> Vec<f64> {
        let psi = self.interaction_field(rho);
        let boltzmann: Vec<f64> = psi.iter().map(|p| (-p).exp()).collect();
        let blocked: Vec<f64> = psi.iter().map(|p| -(-p).exp_m1()).collect();
        let gain = self.jump.apply(rho);
        let extra = self.jump.apply(&blocked);
        (0..rho.len())
            .map(|i| gain[i] * boltzmann[i] + rho[i] * extra[i])
            .collect()
    }
}

/// Named wrapper for [`KineticModel::rhs`].
pub fn kinetic_rhs(model: &KineticModel, rho: &[f64]) -> Vec<f64> {
    model.rhs(rho)
}
