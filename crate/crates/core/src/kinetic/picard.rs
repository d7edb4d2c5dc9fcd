//! Fixed-point iteration of the mild form
//! `rho_t = rho_0 e^{-alpha t} + ∫_0^t e^{-alpha (t-s)} G(rho_s) ds`,
//! with the time integral discretised by the trapezoid rule.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::DensityField;
use crate::horizon;

use super::solver::check_grid;
use super::{KineticModel, KineticTrajectory, SolverConfig};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PicardSolution {
    pub trajectory: KineticTrajectory,
    /// `delta_n = sup_t sup_x |rho^(n) - rho^(n-1)|`.
    pub deltas: Vec<f64>,
    /// `delta_n / delta_{n-1}`.
    pub ratios: Vec<f64>,
    /// Certified contraction factor `q(T)` for this window.
    pub q_bound: f64,
}

pub fn picard_solve(model: &KineticModel, rho0: &DensityField, config: &SolverConfig) -> Result<PicardSolution> {
    config.validate(model.alpha())?;
    check_grid(model, rho0)?;
    let alpha = model.alpha();
    let u0 = rho0.sup();
    let q = horizon::contraction_factor(u0, alpha, model.mean_phi(), config.t_end)?;
    if q >= 1.0 {
        return Err(Error::Horizon {
            rule: "picard contraction",
            detail: format!("q(T) = {q} >= 1 on [0, {}]; shorten the window", config.t_end),
        });
    }

    let steps = config.steps();
    let dt = if steps == 0 { 0.0 } else { config.t_end / steps as f64 };
    let times: Vec<f64> = (0..=steps).map(|k| k as f64 * dt).collect();
    let decay = (-alpha * dt).exp();
    let base = rho0.values();
    let cells = base.len();

    let mut current: Vec<Vec<f64>> = vec![base.to_vec(); steps + 1];
    let mut deltas = Vec::new();
    loop {
        let integrands: Vec<Vec<f64>> = current.iter().map(|r| model.mild_integrand(r)).collect();
        let mut next = Vec::with_capacity(steps + 1);
        let mut memory = vec![0.0; cells];
        for (m, &t) in times.iter().enumerate() {
            if m > 0 {
                for i in 0..cells {
                    memory[i] = decay * memory[i] + 0.5 * dt * (decay * integrands[m - 1][i] + integrands[m][i]);
                }
            }
            let damp = (-alpha * t).exp();
            next.push((0..cells).map(|i| base[i] * damp + memory[i]).collect::<Vec<f64>>());
        }
        let delta = next
            .iter()
            .zip(&current)
            .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()))
            .fold(0.0, f64::max);
        deltas.push(delta);
        current = next;
        if delta < config.picard_tolerance {
            break;
        }
        if deltas.len() >= config.picard_max_iter {
            return Err(Error::NonConvergence { history: deltas });
        }
    }
    let ratios = deltas.windows(2).map(|w| w[1] / w[0]).collect();
    Ok(PicardSolution {
        trajectory: KineticTrajectory {
            grid: *model.grid(),
            times,
            values: current,
        },
        deltas,
        ratios,
        q_bound: q,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Grid;
    use crate::geometry::Torus;
    use crate::kernels::{KernelSpec, PotentialSpec};
    use crate::kinetic::solve_rk4;

    fn setup() -> (KineticModel, Grid) {
        let g = Grid::new(Torus::new(1, 20.0).unwrap(), 128).unwrap();
        // alpha = 1 and <phi> = 1.
        let m = KineticModel::new(
            KernelSpec::top_hat(0.5, 1.0, 1).unwrap(),
            PotentialSpec::top_hat(0.5, 1.0, 1).unwrap(),
            g,
        )
        .unwrap();
        (m, g)
    }

    #[test]
    fn constant_data_is_a_fixed_point() {
        let (m, g) = setup();
        let rho0 = DensityField::constant(g, 1.0).unwrap();
        let sol = picard_solve(&m, &rho0, &SolverConfig::picard(1e-3, 0.01, 1e-12, 50)).unwrap();
        // The first sweep only carries the trapezoid error of ∫ alpha e^{-alpha (t-s)} ds.
        assert!(sol.deltas[0] < 1e-6);
        assert!(sol.deltas.len() <= 3);
        assert!(sol.trajectory.last().iter().all(|v| (v - 1.0).abs() < 1e-6));
    }

    #[test]
    fn contracts_within_bound_and_matches_rk4() {
        let (m, g) = setup();
        let rho0 = DensityField::from_fn(g, |p| 0.5 + 0.5 * (2.0 * std::f64::consts::PI * p[0] / 20.0).cos()).unwrap();
        let config = SolverConfig::picard(1e-3, 0.01, 1e-13, 50);
        let sol = picard_solve(&m, &rho0, &config).unwrap();
        assert!(sol.q_bound < 0.171_44);
        assert!(sol.ratios.iter().all(|r| *r <= sol.q_bound + 0.05), "{:?}", sol.ratios);
        let rk = solve_rk4(&m, &rho0, &SolverConfig::rk4(1e-3, 0.01), 1).unwrap();
        assert!(sol.trajectory.sup_distance(&rk) < 1e-6);
    }

    #[test]
    fn refuses_windows_without_contraction() {
        let (m, g) = setup();
        let rho0 = DensityField::constant(g, 1.0).unwrap();
        let err = picard_solve(&m, &rho0, &SolverConfig::picard(1e-3, 0.2, 1e-12, 50)).unwrap_err();
        assert!(matches!(err, Error::Horizon { .. }));
        let err = picard_solve(&m, &rho0, &SolverConfig::picard(1e-2, 0.9, 1e-12, 50)).unwrap_err();
        assert!(matches!(err, Error::WindowTooLong { .. }));
    }

    #[test]
    fn reports_history_when_iteration_cap_hit() {
        let (m, g) = setup();
        let rho0 = DensityField::from_fn(g, |p| if p[0] < 10.0 { 1.0 } else { 0.0 }).unwrap();
        match picard_solve(&m, &rho0, &SolverConfig::picard(1e-3, 0.02, 1e-15, 2)) {
            Err(Error::NonConvergence { history }) => assert_eq!(history.len(), 2),
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }
}
