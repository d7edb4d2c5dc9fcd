//! JSON run configurations. Unknown fields are rejected everywhere.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use kawasaki::estimator::RadialBins;
use kawasaki::field::Grid;
use kawasaki::geometry::Torus;
use kawasaki::kinetic::SolverConfig;
use kawasaki::simulator::InitialDensity;
use kawasaki::{DensityField, Error, KernelSpec, PotentialSpec, Result, CODE_VERSION};

/// Initial density: a plain number, or a gridded profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Rho0Spec {
    Constant(f64),
    Profile(ProfileSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "profile", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProfileSpec {
    /// Explicit cell values, row-major.
    Grid {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        n_cells: Option<usize>,
        values: Vec<f64>,
    },
    /// `base + amplitude exp(-|x - center|^2 / (2 width^2))`, distances taken periodically.
    Bump {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        n_cells: Option<usize>,
        base: f64,
        amplitude: f64,
        width: f64,
        /// Defaults to the box centre.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        center: Option<Vec<f64>>,
    },
    /// `base + amplitude cos(2 pi mode x0 / L)`.
    Cosine {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        n_cells: Option<usize>,
        base: f64,
        amplitude: f64,
        mode: u32,
    },
}

impl ProfileSpec {
    fn n_cells(&self) -> Option<usize> {
        match self {
            ProfileSpec::Grid { n_cells, .. } | ProfileSpec::Bump { n_cells, .. } | ProfileSpec::Cosine { n_cells, .. } => *n_cells,
        }
    }
}

impl Rho0Spec {
    /// Resolves onto `grid_cells` cells per axis, or the profile's own `n_cells` when `None`.
    pub fn field(&self, torus: Torus, grid_cells: Option<usize>) -> Result<Option<DensityField>> {
        let profile = match self {
            Rho0Spec::Constant(c) => {
                return match grid_cells {
                    Some(n) => Ok(Some(DensityField::constant(Grid::new(torus, n)?, *c)?)),
                    None => Ok(None),
                }
            }
            Rho0Spec::Profile(p) => p,
        };
        let n = match (grid_cells, profile.n_cells()) {
            (Some(a), Some(b)) if a != b => {
                return Err(Error::InvalidSpec(format!("rho0 n_cells {b} differs from the grid n_cells {a}")));
            }
            (Some(a), _) => a,
            (None, Some(b)) => b,
            (None, None) => return Err(Error::InvalidSpec("rho0 profile needs n_cells".into())),
        };
        let grid = Grid::new(torus, n)?;
        let dim = torus.dim;
        let field = match profile {
            ProfileSpec::Grid { values, .. } => {
                if values.len() != grid.len() {
                    return Err(Error::InvalidSpec(format!(
                        "rho0 grid has {} values, expected {}",
                        values.len(),
                        grid.len()
                    )));
                }
                DensityField::new(grid, values.clone())?
            }
            ProfileSpec::Bump {
                base,
                amplitude,
                width,
                center,
                ..
            } => {
                if !(*width > 0.0) {
                    return Err(Error::InvalidSpec(format!("bump width must be positive, got {width}")));
                }
                let mut c = [0.5 * torus.length; 3];
                if let Some(v) = center {
                    if v.len() != dim {
                        return Err(Error::InvalidSpec(format!("bump center needs {dim} coordinates")));
                    }
                    c[..dim].copy_from_slice(v);
                }
                DensityField::from_fn(grid, |p| {
                    let r = torus.distance(p, &c);
                    base + amplitude * (-r * r / (2.0 * width * width)).exp()
                })?
            }
            ProfileSpec::Cosine { base, amplitude, mode, .. } => {
                let k = 2.0 * std::f64::consts::PI * f64::from(*mode) / torus.length;
                DensityField::from_fn(grid, |p| base + amplitude * (k * p[0]).cos())?
            }
        };
        Ok(Some(field))
    }

    pub fn initial_density(&self, torus: Torus) -> Result<InitialDensity> {
        match self {
            Rho0Spec::Constant(c) => Ok(InitialDensity::Constant(*c)),
            Rho0Spec::Profile(_) => Ok(InitialDensity::Field(self.field(torus, None)?.expect("profile resolves to a field"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub torus: Torus,
    pub kernel: KernelSpec,
    pub potential: PotentialSpec,
    #[serde(default = "one")]
    pub epsilon: f64,
    #[serde(default)]
    pub exclude_mover: bool,
    pub rho0: Rho0Spec,
    pub snapshot_times: Vec<f64>,
    pub t_end: f64,
    #[serde(default)]
    pub max_proposals: Option<u64>,
    pub n_trajectories: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub record_events: bool,
    #[serde(default)]
    pub code_version: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KineticConfig {
    pub torus: Torus,
    pub n_cells: usize,
    pub kernel: KernelSpec,
    pub potential: PotentialSpec,
    pub rho0: Rho0Spec,
    pub solver: SolverConfig,
    /// Keep every n-th step in the output.
    #[serde(default = "one_usize")]
    pub store_every: usize,
    /// Also require the window to be Picard-certified when solving with RK4.
    #[serde(default)]
    pub certify_window: bool,
    #[serde(default)]
    pub code_version: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HorizonConfig {
    pub theta0: f64,
    #[serde(default)]
    pub theta: Option<f64>,
    #[serde(default)]
    pub t: Option<f64>,
    pub alpha: f64,
    pub c_phi: f64,
    #[serde(default)]
    pub mean_phi: Option<f64>,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default)]
    pub code_version: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub torus: Torus,
    pub n_cells: usize,
    pub kernel: KernelSpec,
    pub potential: PotentialSpec,
    pub rho0: Rho0Spec,
    pub epsilons: Vec<f64>,
    pub times: Vec<f64>,
    pub n_traj_base: usize,
    pub estimator_cells: usize,
    pub radial_bins: RadialBins,
    pub dt: f64,
    #[serde(default)]
    pub seed: u64,
    pub particle_budget: f64,
    #[serde(default)]
    pub exclude_mover: bool,
    #[serde(default)]
    pub code_version: Option<String>,
}

fn one() -> f64 {
    1.0
}

fn one_usize() -> usize {
    1
}

fn default_samples() -> usize {
    11
}

impl KineticConfig {
    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.torus, self.n_cells)
    }

    pub fn rho0_field(&self) -> Result<DensityField> {
        Ok(self.rho0.field(self.torus, Some(self.n_cells))?.expect("grid given"))
    }
}

impl SweepConfig {
    pub fn sweep_spec(&self) -> Result<kawasaki::scaling::SweepSpec> {
        Ok(kawasaki::scaling::SweepSpec {
            kernel: self.kernel,
            potential: self.potential,
            rho0: self.rho0.field(self.torus, Some(self.n_cells))?.expect("grid given"),
            epsilons: self.epsilons.clone(),
            times: self.times.clone(),
            n_traj_base: self.n_traj_base,
            estimator_cells: self.estimator_cells,
            radial_bins: self.radial_bins,
            dt: self.dt,
            seed: self.seed,
            particle_budget: self.particle_budget,
            exclude_mover: self.exclude_mover,
        })
    }
}

/// Any of the accepted config documents.
#[derive(Debug, Clone, PartialEq)]
pub enum AnyConfig {
    Simulate(SimulateConfig),
    Kinetic(KineticConfig),
    Horizon(HorizonConfig),
    Sweep(SweepConfig),
}

impl AnyConfig {
    /// Picks the schema from its distinguishing key.
    pub fn infer(value: serde_json::Value) -> Result<Self> {
        let has = |k: &str| value.get(k).is_some();
        Ok(if has("epsilons") {
            AnyConfig::Sweep(serde_json::from_value(value)?)
        } else if has("solver") {
            AnyConfig::Kinetic(serde_json::from_value(value)?)
        } else if has("snapshot_times") {
            AnyConfig::Simulate(serde_json::from_value(value)?)
        } else if has("theta0") {
            AnyConfig::Horizon(serde_json::from_value(value)?)
        } else {
            return Err(Error::InvalidSpec(
                "cannot tell the config kind: expected one of `epsilons`, `solver`, `snapshot_times` or `theta0`".into(),
            ));
        })
    }
}

pub fn read_json(path: &Path) -> Result<serde_json::Value> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

pub fn load<T: DeserializeOwned>(path: &Path) -> Result<T> {
    Ok(serde_json::from_value(read_json(path)?)?)
}

/// Writes `manifest.json`: the resolved config stamped with the code version.
pub fn write_manifest<T: Serialize>(config: &T, dir: &Path) -> Result<()> {
    let mut value = serde_json::to_value(config)?;
    value["code_version"] = serde_json::Value::String(CODE_VERSION.to_string());
    std::fs::create_dir_all(dir)?;
    let text = serde_json::to_string_pretty(&value)?;
    std::fs::write(dir.join("manifest.json"), text + "\n")?;
    Ok(())
}
