//! Jump kernels, pair potentials and the scalar constants derived from them.
//!
//! Every profile is radial, so `a(x) = a(-x)` holds by construction. Profiles
//! with unbounded support are truncated at the radius where they fall below
//! `1e-12 * height`; the truncated function is what every module evaluates.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{norm, unit_ball_volume, unit_sphere_area, Point, MAX_DIM};
use crate::quadrature;

/// Relative height below which a profile is treated as zero.
pub const SUPPORT_CUTOFF: f64 = 1e-12;

const QUAD_REL_TOL: f64 = 1e-10;

/// Radial shape shared by kernels and potentials.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RadialProfile {
    TopHat { radius: f64, height: f64 },
    Gaussian { sigma: f64, height: f64 },
    Exponential { rate: f64, height: f64 },
}

impl RadialProfile {
    pub fn height(&self) -> f64 {
        match *self {
            RadialProfile::TopHat { height, .. }
            | RadialProfile::Gaussian { height, .. }
            | RadialProfile::Exponential { height, .. } => height,
        }
    }

    fn shape_parameter(&self) -> (&'static str, f64) {
        match *self {
            RadialProfile::TopHat { radius, .. } => ("radius", radius),
            RadialProfile::Gaussian { sigma, .. } => ("sigma", sigma),
            RadialProfile::Exponential { rate, .. } => ("rate", rate),
        }
    }

    fn validate(&self, allow_zero_height: bool) -> Result<()> {
        let (name, value) = self.shape_parameter();
        if !(value.is_finite() && value > 0.0) {
            return Err(Error::InvalidSpec(format!("{name} must be positive, got {value}")));
        }
        let h = self.height();
        let ok = if allow_zero_height { h >= 0.0 } else { h > 0.0 };
        if !(h.is_finite() && ok) {
            return Err(Error::InvalidSpec(format!("height must be positive, got {h}")));
        }
        Ok(())
    }

    /// Radius beyond which the profile is identically zero.
    pub fn effective_radius(&self) -> f64 {
        if self.height() == 0.0 {
            return 0.0;
        }
        let log_cut = -SUPPORT_CUTOFF.ln();
        match *self {
            RadialProfile::TopHat { radius, .. } => radius,
            RadialProfile::Gaussian { sigma, .. } => sigma * (2.0 * log_cut).sqrt(),
            RadialProfile::Exponential { rate, .. } => log_cut / rate,
        }
    }

    /// Profile value at distance `r` from the origin.
    pub fn at_radius(&self, r: f64) -> f64 {
        if r > self.effective_radius() {
            return 0.0;
        }
        match *self {
            RadialProfile::TopHat { height, .. } => height,
            RadialProfile::Gaussian { sigma, height } => height * (-0.5 * (r / sigma).powi(2)).exp(),
            RadialProfile::Exponential { rate, height } => height * (-rate * r).exp(),
        }
    }

    /// Closed-form integral over `R^dim` of the untruncated profile.
    pub fn integral(&self, dim: usize) -> f64 {
        let d = dim as f64;
        match *self {
            RadialProfile::TopHat { radius, height } => height * unit_ball_volume(dim) * radius.powi(dim as i32),
            RadialProfile::Gaussian { sigma, height } => height * (2.0 * PI * sigma * sigma).powf(0.5 * d),
            RadialProfile::Exponential { rate, height } => {
                let gamma_d: f64 = (1..dim).map(|k| k as f64).product();
                height * unit_sphere_area(dim) * gamma_d / rate.powi(dim as i32)
            }
        }
    }

    /// Integrates `g(profile(r))` over `R^dim` by adaptive radial quadrature.
    fn radial_integral<G: Fn(f64) -> f64>(&self, dim: usize, g: G) -> Result<f64> {
        let r_max = self.effective_radius();
        if r_max == 0.0 {
            return Ok(0.0);
        }
        let shell = unit_sphere_area(dim);
        let est = quadrature::integrate(
            |r| g(self.at_radius(r)) * r.powi(dim as i32 - 1),
            0.0,
            r_max,
            QUAD_REL_TOL,
            1e-300,
        )?;
        Ok(shell * est.value)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum Family {
    TopHat,
    Gaussian,
    Exponential,
    Local,
}

/// Flat JSON form shared by kernels and potentials:
/// `{"family":"top_hat","radius":1.0,"height":1.0,"dim":1}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpecRepr {
    family: Family,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sigma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    height: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    kappa: Option<f64>,
    dim: usize,
}

impl SpecRepr {
    fn from_profile(profile: &RadialProfile, dim: usize) -> Self {
        let mut repr = SpecRepr {
            family: Family::TopHat,
            radius: None,
            sigma: None,
            rate: None,
            height: Some(profile.height()),
            kappa: None,
            dim,
        };
        match *profile {
            RadialProfile::TopHat { radius, .. } => repr.radius = Some(radius),
            RadialProfile::Gaussian { sigma, .. } => {
                repr.family = Family::Gaussian;
                repr.sigma = Some(sigma);
            }
            RadialProfile::Exponential { rate, .. } => {
                repr.family = Family::Exponential;
                repr.rate = Some(rate);
            }
        }
        repr
    }

    fn profile(&self) -> Result<RadialProfile> {
        let need = |name: &str, v: Option<f64>| {
            v.ok_or_else(|| Error::InvalidSpec(format!("family {:?} requires field `{name}`", self.family)))
        };
        let forbid = |name: &str, v: Option<f64>| match v {
            Some(_) => Err(Error::InvalidSpec(format!(
                "field `{name}` does not apply to family {:?}",
                self.family
            ))),
            None => Ok(()),
        };
        forbid("kappa", self.kappa)?;
        let height = need("height", self.height)?;
        let profile = match self.family {
            Family::TopHat => {
                forbid("sigma", self.sigma)?;
                forbid("rate", self.rate)?;
                RadialProfile::TopHat {
                    radius: need("radius", self.radius)?,
                    height,
                }
            }
            Family::Gaussian => {
                forbid("radius", self.radius)?;
                forbid("rate", self.rate)?;
                RadialProfile::Gaussian {
                    sigma: need("sigma", self.sigma)?,
                    height,
                }
            }
            Family::Exponential => {
                forbid("radius", self.radius)?;
                forbid("sigma", self.sigma)?;
                RadialProfile::Exponential {
                    rate: need("rate", self.rate)?,
                    height,
                }
            }
            Family::Local => unreachable!("local family handled by the caller"),
        };
        Ok(profile)
    }
}

fn check_dim(dim: usize) -> Result<()> {
    if (1..=MAX_DIM).contains(&dim) {
        Ok(())
    } else {
        Err(Error::InvalidSpec(format!("dimension must be 1, 2 or 3, got {dim}")))
    }
}

/// The jump kernel `a`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SpecRepr", into = "SpecRepr")]
pub struct KernelSpec {
    profile: RadialProfile,
    dim: usize,
    alpha: f64,
}

impl KernelSpec {
    pub fn new(profile: RadialProfile, dim: usize) -> Result<Self> {
        check_dim(dim)?;
        profile.validate(false)?;
        Ok(KernelSpec {
            profile,
            dim,
            alpha: profile.integral(dim),
        })
    }

    pub fn top_hat(radius: f64, height: f64, dim: usize) -> Result<Self> {
        Self::new(RadialProfile::TopHat { radius, height }, dim)
    }

    pub fn gaussian(sigma: f64, height: f64, dim: usize) -> Result<Self> {
        Self::new(RadialProfile::Gaussian { sigma, height }, dim)
    }

    pub fn exponential(rate: f64, height: f64, dim: usize) -> Result<Self> {
        Self::new(RadialProfile::Exponential { rate, height }, dim)
    }

    pub fn profile(&self) -> &RadialProfile {
        &self.profile
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Total jump intensity `alpha = ∫ a`.
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn effective_radius(&self) -> f64 {
        self.profile.effective_radius()
    }

    pub fn value(&self, x: &Point) -> f64 {
        self.profile.at_radius(norm(x, self.dim))
    }

    /// Draws a displacement with density `a / alpha`.
    pub fn sample_displacement<R: Rng + ?Sized>(&self, rng: &mut R) -> Point {
        let dim = self.dim;
        match self.profile {
            RadialProfile::Gaussian { sigma, .. } => {
                let mut p = [0.0; MAX_DIM];
                for x in p.iter_mut().take(dim) {
                    let z: f64 = rng.sample(StandardNormal);
                    *x = sigma * z;
                }
                p
            }
            RadialProfile::TopHat { radius, .. } => {
                if dim == 1 {
                    return [radius * (2.0 * rng.random::<f64>() - 1.0), 0.0, 0.0];
                }
                let r = radius * rng.random::<f64>().powf(1.0 / dim as f64);
                scale(random_direction(dim, rng), r)
            }
            RadialProfile::Exponential { rate, .. } => {
                // Radial density r^(d-1) e^(-rate r) is Gamma(d, 1/rate).
                let log_product: f64 = (0..dim).map(|_| (1.0 - rng.random::<f64>()).ln()).sum();
                let r = -log_product / rate;
                scale(random_direction(dim, rng), r)
            }
        }
    }
}

impl TryFrom<SpecRepr> for KernelSpec {
    type Error = Error;

    fn try_from(repr: SpecRepr) -> Result<Self> {
        if repr.family == Family::Local {
            return Err(Error::InvalidSpec("the jump kernel cannot be local".into()));
        }
        KernelSpec::new(repr.profile()?, repr.dim)
    }
}

impl From<KernelSpec> for SpecRepr {
    fn from(spec: KernelSpec) -> Self {
        SpecRepr::from_profile(&spec.profile, spec.dim)
    }
}

fn random_direction<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Point {
    loop {
        let mut p = [0.0; MAX_DIM];
        for x in p.iter_mut().take(dim) {
            *x = rng.sample(StandardNormal);
        }
        let n = norm(&p, dim);
        if n > 1e-300 {
            return scale(p, 1.0 / n);
        }
    }
}

fn scale(mut p: Point, s: f64) -> Point {
    for x in p.iter_mut() {
        *x *= s;
    }
    p
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum PotentialShape {
    Radial(RadialProfile),
    /// Contact repulsion: `phi * rho` is replaced by `kappa * rho` pointwise.
    Local { kappa: f64 },
}

/// The repulsive pair potential `phi >= 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SpecRepr", into = "SpecRepr")]
pub struct PotentialSpec {
    shape: PotentialShape,
    dim: usize,
}

impl PotentialSpec {
    pub fn new(profile: RadialProfile, dim: usize) -> Result<Self> {
        check_dim(dim)?;
        profile.validate(true)?;
        Ok(PotentialSpec {
            shape: PotentialShape::Radial(profile),
            dim,
        })
    }

    pub fn local(kappa: f64, dim: usize) -> Result<Self> {
        check_dim(dim)?;
        if !(kappa.is_finite() && kappa >= 0.0) {
            return Err(Error::InvalidSpec(format!("kappa must be non-negative, got {kappa}")));
        }
        Ok(PotentialSpec {
            shape: PotentialShape::Local { kappa },
            dim,
        })
    }

    pub fn zero(dim: usize) -> Result<Self> {
        Self::top_hat(1.0, 0.0, dim)
    }

    pub fn top_hat(radius: f64, height: f64, dim: usize) -> Result<Self> {
        Self::new(RadialProfile::TopHat { radius, height }, dim)
    }

    pub fn gaussian(sigma: f64, height: f64, dim: usize) -> Result<Self> {
        Self::new(RadialProfile::Gaussian { sigma, height }, dim)
    }

    pub fn exponential(rate: f64, height: f64, dim: usize) -> Result<Self> {
        Self::new(RadialProfile::Exponential { rate, height }, dim)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// The radial profile, or `None` for the local contact potential.
    pub fn profile(&self) -> Option<&RadialProfile> {
        match &self.shape {
            PotentialShape::Radial(p) => Some(p),
            PotentialShape::Local { .. } => None,
        }
    }

    pub fn kappa(&self) -> Option<f64> {
        match self.shape {
            PotentialShape::Local { kappa } => Some(kappa),
            PotentialShape::Radial(_) => None,
        }
    }

    pub fn is_local(&self) -> bool {
        self.kappa().is_some()
    }

    pub fn is_zero(&self) -> bool {
        match self.shape {
            PotentialShape::Radial(p) => p.height() == 0.0,
            PotentialShape::Local { kappa } => kappa == 0.0,
        }
    }

    /// Interaction range; zero for the local and the vanishing potential.
    pub fn effective_radius(&self) -> f64 {
        match &self.shape {
            PotentialShape::Radial(p) => p.effective_radius(),
            PotentialShape::Local { .. } => 0.0,
        }
    }

    pub fn value(&self, x: &Point) -> f64 {
        self.value_at_radius(norm(x, self.dim))
    }

    pub fn value_at_radius(&self, r: f64) -> f64 {
        match &self.shape {
            PotentialShape::Radial(p) => p.at_radius(r),
            PotentialShape::Local { .. } => 0.0,
        }
    }

    /// `<phi> = ∫ phi`; equals `kappa` for the local potential.
    pub fn mean(&self) -> f64 {
        match &self.shape {
            PotentialShape::Radial(p) => p.integral(self.dim),
            PotentialShape::Local { kappa } => *kappa,
        }
    }

    /// `c_phi(eps) = eps^-1 ∫ (1 - exp(-eps phi))`, by radial quadrature.
    ///
    /// For the local potential this returns `kappa`, the `eps -> 0` value that
    /// bounds every finite-range approximation from above.
    pub fn c_phi(&self, epsilon: f64) -> Result<f64> {
        if !(epsilon.is_finite() && epsilon > 0.0) {
            return Err(Error::InvalidInput(format!("epsilon must be positive, got {epsilon}")));
        }
        match &self.shape {
            PotentialShape::Local { kappa } => Ok(*kappa),
            PotentialShape::Radial(p) => p.radial_integral(self.dim, |phi| -(-epsilon * phi).exp_m1() / epsilon),
        }
    }

    /// Scaled Mayer-type factors at interaction strength `epsilon`.
    pub fn scaled(&self, epsilon: f64) -> ScaledFactors {
        ScaledFactors {
            epsilon,
            potential: *self,
        }
    }
}

impl TryFrom<SpecRepr> for PotentialSpec {
    type Error = Error;

    fn try_from(repr: SpecRepr) -> Result<Self> {
        if repr.family == Family::Local {
            for (name, v) in [
                ("radius", repr.radius),
                ("sigma", repr.sigma),
                ("rate", repr.rate),
                ("height", repr.height),
            ] {
                if v.is_some() {
                    return Err(Error::InvalidSpec(format!("field `{name}` does not apply to family Local")));
                }
            }
            let kappa = repr
                .kappa
                .ok_or_else(|| Error::InvalidSpec("family Local requires field `kappa`".into()))?;
            return PotentialSpec::local(kappa, repr.dim);
        }
        PotentialSpec::new(repr.profile()?, repr.dim)
    }
}

impl From<PotentialSpec> for SpecRepr {
    fn from(spec: PotentialSpec) -> Self {
        match spec.shape {
            PotentialShape::Radial(p) => SpecRepr::from_profile(&p, spec.dim),
            PotentialShape::Local { kappa } => SpecRepr {
                family: Family::Local,
                radius: None,
                sigma: None,
                rate: None,
                height: None,
                kappa: Some(kappa),
                dim: spec.dim,
            },
        }
    }
}

/// `t(x, y) = exp(-eps phi(x - y)) - 1` and `tau = t + 1`.
#[derive(Debug, Clone, Copy)]
pub struct ScaledFactors {
    pub epsilon: f64,
    pub potential: PotentialSpec,
}

impl ScaledFactors {
    pub fn t(&self, displacement: &Point) -> f64 {
        (-self.epsilon * self.potential.value(displacement)).exp_m1()
    }

    pub fn tau(&self, displacement: &Point) -> f64 {
        (-self.epsilon * self.potential.value(displacement)).exp()
    }
}
