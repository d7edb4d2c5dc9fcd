//! Continuum Kawasaki hopping dynamics.
//!
//! The crate bundles four views of the same model of particles hopping on a
//! periodic box under a jump kernel `a` and a repulsive pair potential `phi`:
//!
//! * [`simulator`]: exact thinning simulation of the finite particle system,
//! * [`estimator`]: ensemble estimates of the one- and two-point correlation functions,
//! * [`kinetic`]: deterministic solvers for the mean-field kinetic equation,
//! * [`horizon`]: closed-form existence horizons, operator bounds and contraction factors.
//!
//! [`scaling`] ties the simulator and the kinetic solver together to check the
//! mean-field limit along a ladder of interaction strengths.

pub mod error;
pub mod estimator;
pub mod field;
pub mod geometry;
pub mod horizon;
pub mod kernels;
pub mod kinetic;
pub mod quadrature;
pub mod rng;
pub mod scaling;
pub mod simulator;

pub use error::{Error, Result};
pub use field::DensityField;
pub use geometry::{Point, Torus};
pub use kernels::{KernelSpec, PotentialSpec, RadialProfile, ScaledFactors};

/// Version string echoed into run manifests.
pub const CODE_VERSION: &str = concat!("kawasaki-core ", env!("CARGO_PKG_VERSION"));
