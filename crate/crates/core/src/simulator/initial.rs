use rand::distr::weighted::WeightedIndex;
use rand::Rng;
use rand_distr::{Distribution, Poisson};

use crate::error::{Error, Result};
use crate::field::DensityField;
use crate::geometry::{Point, Torus};

use super::Configuration;

/// Intensity of the Poisson initial state.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialDensity {
    Constant(f64),
    /// Piecewise constant on the grid cells.
    Field(DensityField),
}

impl InitialDensity {
    /// Expected particle number `∫ rho` over the torus.
    pub fn mass(&self, torus: &Torus) -> f64 {
        match self {
            InitialDensity::Constant(rho) => rho * torus.volume(),
            InitialDensity::Field(f) => f.mass(),
        }
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Ok(match self {
            InitialDensity::Constant(rho) => InitialDensity::Constant(rho * factor),
            InitialDensity::Field(f) => InitialDensity::Field(f.scaled(factor)?),
        })
    }

    fn validate(&self, torus: &Torus) -> Result<()> {
        match self {
            InitialDensity::Constant(rho) if !(rho.is_finite() && *rho >= 0.0) => {
                Err(Error::InvalidInput(format!("density must be non-negative, got {rho}")))
            }
            InitialDensity::Field(f) if f.grid().torus != *torus => Err(Error::InvalidInput(
                "density grid is defined on a different torus".into(),
            )),
            _ => Ok(()),
        }
    }
}

/// Poisson point process with intensity `density`: `N ~ Poisson(∫ rho)`,
/// then i.i.d. positions with density `rho / ∫ rho`.
pub fn sample_poisson_positions<R: Rng + ?Sized>(torus: &Torus, density: &InitialDensity, rng: &mut R) -> Result<Vec<Point>> {
    density.validate(torus)?;
    let mass = density.mass(torus);
    if mass == 0.0 {
        return Ok(Vec::new());
    }
    let poisson = Poisson::new(mass).map_err(|e| Error::InvalidInput(format!("poisson mean {mass}: {e}")))?;
    let n = poisson.sample(rng) as usize;
    let dim = torus.dim;
    let mut positions = Vec::with_capacity(n);
    match density {
        InitialDensity::Constant(_) => {
            for _ in 0..n {
                let mut p = [0.0; 3];
                for x in p.iter_mut().take(dim) {
                    *x = rng.random::<f64>() * torus.length;
                }
                positions.push(torus.wrap(p));
            }
        }
        InitialDensity::Field(field) => {
            let grid = field.grid();
            let h = grid.spacing();
            let cells = WeightedIndex::new(field.values())
                .map_err(|e| Error::InvalidInput(format!("density weights: {e}")))?;
            for _ in 0..n {
                let idx = grid.multi_index(cells.sample(rng));
                let mut p = [0.0; 3];
                for k in 0..dim {
                    p[k] = (idx[k] as f64 + rng.random::<f64>()) * h;
                }
                positions.push(torus.wrap(p));
            }
        }
    }
    Ok(positions)
}

/// Samples a Poisson configuration indexed for interactions of range `interaction_radius`.
pub fn sample_poisson_initial<R: Rng + ?Sized>(
    torus: &Torus,
    density: &InitialDensity,
    interaction_radius: f64,
    rng: &mut R,
) -> Result<Configuration> {
    let positions = sample_poisson_positions(torus, density, rng)?;
    Configuration::new(*torus, positions, interaction_radius)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Grid;
    use crate::rng::stream;

    #[test]
    fn zero_density_gives_empty_configuration() {
        let torus = Torus::new(1, 20.0).unwrap();
        for i in 0..10 {
            let c = sample_poisson_initial(&torus, &InitialDensity::Constant(0.0), 1.0, &mut stream(1, i)).unwrap();
            assert!(c.is_empty());
        }
    }

    #[test]
    fn negative_density_is_rejected() {
        let torus = Torus::new(1, 20.0).unwrap();
        assert!(sample_poisson_positions(&torus, &InitialDensity::Constant(-0.5), &mut stream(1, 0)).is_err());
    }

    #[test]
    fn counts_are_poisson() {
        let torus = Torus::new(1, 20.0).unwrap();
        let n = 10_000;
        let counts: Vec<f64> = (0..n)
            .map(|i| {
                sample_poisson_positions(&torus, &InitialDensity::Constant(0.5), &mut stream(17, i))
                    .unwrap()
                    .len() as f64
            })
            .collect();
        let mean = counts.iter().sum::<f64>() / n as f64;
        let var = counts.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
        assert!((mean - 10.0).abs() < 3.0 * (10.0f64 / n as f64).sqrt(), "mean {mean}");
        let dispersion = var / mean;
        assert!((0.95..=1.05).contains(&dispersion), "dispersion {dispersion}");
    }

    #[test]
    fn gridded_density_puts_particles_only_where_rho_is_positive() {
        let torus = Torus::new(2, 10.0).unwrap();
        let grid = Grid::new(torus, 5).unwrap();
        let field = DensityField::from_fn(grid, |p| if p[0] < 4.0 { 3.0 } else { 0.0 }).unwrap();
        let pts = sample_poisson_positions(&torus, &InitialDensity::Field(field), &mut stream(4, 0)).unwrap();
        assert!(!pts.is_empty());
        assert!(pts.iter().all(|p| p[0] < 4.0 && torus.contains(p)));
    }
}
