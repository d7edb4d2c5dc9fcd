//! Exact stochastic simulation of continuum Kawasaki hopping on a torus.
//!
//! A particle at `x` jumps to `y` at rate
//! `c(x, y, gamma) = a(x - y) * exp(-eps * E(y, gamma))`, with
//! `E(y, gamma) = sum_{z in gamma} phi(y - z)`. Because `phi >= 0` the rate is
//! dominated by `a(x - y)`, so the process is sampled by thinning: proposals
//! arrive at total rate `alpha * |gamma|`, a uniformly chosen particle proposes
//! a displacement drawn from `a / alpha`, and the move is accepted with
//! probability `exp(-eps * E(y, gamma))`.

mod cell_list;
mod ensemble;
mod initial;

pub use cell_list::CellList;
pub use ensemble::{simulate_ensemble, simulate_ensemble_serial, simulate_from, EnsembleSpec, Trajectory};
pub use initial::{sample_poisson_initial, sample_poisson_positions, InitialDensity};

use rand::Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Point, Torus};
use crate::kernels::{KernelSpec, PotentialSpec};

/// Finite point configuration with a cell-list index for the potential range.
#[derive(Debug, Clone)]
pub struct Configuration {
    torus: Torus,
    positions: Vec<Point>,
    cells: CellList,
    cell_radius: f64,
}

impl Configuration {
    pub fn new(torus: Torus, positions: Vec<Point>, interaction_radius: f64) -> Result<Self> {
        torus.validate()?;
        if let Some(p) = positions.iter().find(|p| !torus.contains(p)) {
            return Err(Error::InvalidInput(format!("position {p:?} lies outside the torus")));
        }
        let cells = CellList::new(torus, interaction_radius, &positions);
        Ok(Configuration {
            torus,
            positions,
            cells,
            cell_radius: interaction_radius,
        })
    }

    pub fn torus(&self) -> &Torus {
        &self.torus
    }

    pub fn positions(&self) -> &[Point] {
        &self.positions
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// Radius the cell list was built for.
    pub fn cell_radius(&self) -> f64 {
        self.cell_radius
    }

    pub fn move_particle(&mut self, i: usize, to: Point) {
        self.positions[i] = to;
        self.cells.relocate(i, &to);
    }

    pub fn index_is_consistent(&self) -> bool {
        self.cells.is_consistent(&self.positions)
    }

    pub fn cell_list(&self) -> &CellList {
        &self.cells
    }
}

/// `sum_{z in gamma, z != exclude} phi(y - z)` with minimal-image distances.
pub fn interaction_energy(y: &Point, config: &Configuration, potential: &PotentialSpec, exclude: Option<usize>) -> f64 {
    let range = potential.effective_radius();
    if range == 0.0 || potential.is_zero() {
        return 0.0;
    }
    debug_assert!(config.cell_radius >= range, "cell list built for a shorter range than the potential");
    let torus = &config.torus;
    let mut energy = 0.0;
    config.cells.for_each_candidate(y, |j| {
        if Some(j) != exclude {
            let r = torus.distance(y, &config.positions[j]);
            if r <= range {
                energy += potential.value_at_radius(r);
            }
        }
    });
    energy
}

/// Total pair energy `sum_{i<j} phi(x_i - x_j)`.
pub fn total_energy(config: &Configuration, potential: &PotentialSpec) -> f64 {
    0.5 * config
        .positions
        .iter()
        .enumerate()
        .map(|(i, x)| interaction_energy(x, config, potential, Some(i)))
        .sum::<f64>()
}

/// `[E(gamma) + E(y, gamma)] - [E(gamma') + E(x, gamma')]` for the move
/// `gamma' = gamma \ x ∪ y`. The identity behind reversibility of Gibbs
/// measures says this is zero.
pub fn detailed_balance_residual(config: &Configuration, x_index: usize, y: &Point, potential: &PotentialSpec) -> f64 {
    let x = config.positions[x_index];
    let forward = total_energy(config, potential) + interaction_energy(y, config, potential, None);
    let mut moved = config.clone();
    moved.move_particle(x_index, *y);
    let backward = total_energy(&moved, potential) + interaction_energy(&x, &moved, potential, None);
    forward - backward
}

/// One thinning proposal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub time: f64,
    pub mover: usize,
    pub from: Point,
    pub to: Point,
    pub accepted: bool,
}

/// Model parameters of one simulation: geometry, kernel, potential and the
/// interaction strength `epsilon` multiplying `phi`.
#[derive(Debug, Clone, Copy)]
pub struct Dynamics {
    torus: Torus,
    kernel: KernelSpec,
    potential: PotentialSpec,
    epsilon: f64,
    mover_in_energy: bool,
}

impl Dynamics {
    pub fn new(torus: Torus, kernel: KernelSpec, potential: PotentialSpec, epsilon: f64) -> Result<Self> {
        torus.validate()?;
        if kernel.dim() != torus.dim || potential.dim() != torus.dim {
            return Err(Error::InvalidSpec(format!(
                "dimension mismatch: torus {}, kernel {}, potential {}",
                torus.dim,
                kernel.dim(),
                potential.dim()
            )));
        }
        if potential.is_local() {
            return Err(Error::InvalidSpec(
                "the local contact potential has no particle-level counterpart; use a finite-range family".into(),
            ));
        }
        if !(epsilon.is_finite() && epsilon > 0.0) {
            return Err(Error::InvalidInput(format!("epsilon must be positive, got {epsilon}")));
        }
        check_minimal_image(&torus, &kernel, &potential)?;
        Ok(Dynamics {
            torus,
            kernel,
            potential,
            epsilon,
            mover_in_energy: true,
        })
    }

    /// Leaves the mover's own contribution `phi(y - x)` out of the energy at
    /// the target. Off by default.
    pub fn excluding_mover(mut self) -> Self {
        self.mover_in_energy = false;
        self
    }

    pub fn torus(&self) -> &Torus {
        &self.torus
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn potential(&self) -> &PotentialSpec {
        &self.potential
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn mover_in_energy(&self) -> bool {
        self.mover_in_energy
    }

    pub fn configuration(&self, positions: Vec<Point>) -> Result<Configuration> {
        Configuration::new(self.torus, positions, self.potential.effective_radius())
    }

    fn target_energy(&self, config: &Configuration, x_index: usize, y: &Point) -> f64 {
        let exclude = if self.mover_in_energy { None } else { Some(x_index) };
        interaction_energy(y, config, &self.potential, exclude)
    }

    /// `c(x, y, gamma) = a(x - y) exp(-eps E(y, gamma))`.
    pub fn jump_rate(&self, config: &Configuration, x_index: usize, y: &Point) -> f64 {
        let x = config.positions[x_index];
        let a = self.kernel.value(&self.torus.displacement(&x, y));
        if a == 0.0 {
            return 0.0;
        }
        a * (-self.epsilon * self.target_energy(config, x_index, y)).exp()
    }

    /// Upper bound `alpha * |gamma|` on the total jump rate.
    pub fn envelope_rate(&self, config: &Configuration) -> f64 {
        self.kernel.alpha() * config.len() as f64
    }

    /// Time of the next proposal after `clock`.
    pub fn next_proposal_time<R: Rng + ?Sized>(&self, config: &Configuration, clock: f64, rng: &mut R) -> Result<f64> {
        if config.is_empty() {
            return Err(Error::NoDynamics);
        }
        let exp = Exp::new(self.envelope_rate(config)).expect("envelope rate is positive");
        Ok(clock + exp.sample(rng))
    }

    /// Proposes a move at `time` and applies it if accepted.
    pub fn propose<R: Rng + ?Sized>(&self, config: &mut Configuration, time: f64, rng: &mut R) -> Event {
        let mover = rng.random_range(0..config.len());
        let from = config.positions[mover];
        let to = self.torus.translate(&from, &self.kernel.sample_displacement(rng));
        let ratio = (-self.epsilon * self.target_energy(config, mover, &to)).exp();
        debug_assert!(ratio > 0.0 && ratio <= 1.0, "envelope violated: acceptance ratio {ratio}");
        // Draw the uniform even when phi vanishes so the stream layout does not depend on the potential.
        let u: f64 = rng.random();
        let accepted = u < ratio;
        if accepted {
            config.move_particle(mover, to);
        }
        Event {
            time,
            mover,
            from,
            to,
            accepted,
        }
    }

    /// Advances the clock to the next proposal and processes it.
    pub fn gillespie_step<R: Rng + ?Sized>(&self, config: &mut Configuration, clock: &mut f64, rng: &mut R) -> Result<Event> {
        let t = self.next_proposal_time(config, *clock, rng)?;
        *clock = t;
        Ok(self.propose(config, t, rng))
    }
}

/// Rejects boxes too small for the minimal-image convention: `L` must exceed
/// four times the larger of the kernel and potential ranges.
pub fn check_minimal_image(torus: &Torus, kernel: &KernelSpec, potential: &PotentialSpec) -> Result<()> {
    let range = kernel.effective_radius().max(potential.effective_radius());
    if torus.length <= 4.0 * range {
        return Err(Error::InvalidGeometry {
            rule: "minimal-image ambiguity",
            detail: format!(
                "side length {} must exceed 4 x interaction range {} = {}",
                torus.length,
                range,
                4.0 * range
            ),
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use approx::assert_relative_eq;

    fn line(positions: &[f64], length: f64, radius: f64) -> Configuration {
        let torus = Torus::new(1, length).unwrap();
        Configuration::new(torus, positions.iter().map(|&x| [x, 0.0, 0.0]).collect(), radius).unwrap()
    }

    fn random_config(n: usize, torus: Torus, radius: f64, seed: u64) -> Configuration {
        let mut rng = stream(seed, 0);
        let positions = (0..n)
            .map(|_| {
                let mut p = [0.0; 3];
                for x in p.iter_mut().take(torus.dim) {
                    *x = rng.random::<f64>() * torus.length;
                }
                p
            })
            .collect();
        Configuration::new(torus, positions, radius).unwrap()
    }

    fn brute_energy(y: &Point, config: &Configuration, phi: &PotentialSpec, exclude: Option<usize>) -> f64 {
        let t = config.torus();
        config
            .positions()
            .iter()
            .enumerate()
            .filter(|(j, _)| Some(*j) != exclude)
            .map(|(_, z)| {
                let d = t.displacement(y, z);
                phi.value(&d)
            })
            .sum()
    }

    #[test]
    fn energy_examples() {
        let phi = PotentialSpec::top_hat(1.0, 1.0, 1).unwrap();
        let c = line(&[0.0, 0.5, 3.0], 10.0, 1.0);
        assert_eq!(interaction_energy(&[0.2, 0.0, 0.0], &c, &phi, None), 2.0);
        assert_eq!(interaction_energy(&[0.2, 0.0, 0.0], &c, &phi, Some(1)), 1.0);
        let empty = line(&[], 10.0, 1.0);
        assert_eq!(interaction_energy(&[0.2, 0.0, 0.0], &empty, &phi, None), 0.0);
        // Across the periodic seam.
        let seam = line(&[9.8], 10.0, 1.0);
        assert_eq!(interaction_energy(&[0.3, 0.0, 0.0], &seam, &phi, None), 1.0);
    }

    #[test]
    fn cell_list_energy_matches_all_pairs() {
        let mut rng = stream(99, 0);
        for (k, (dim, phi)) in [
            (1, PotentialSpec::top_hat(1.0, 1.0, 1).unwrap()),
            (2, PotentialSpec::gaussian(0.4, 2.0, 2).unwrap()),
            (3, PotentialSpec::exponential(3.0, 1.0, 3).unwrap()),
        ]
        .into_iter()
        .enumerate()
        {
            let torus = Torus::new(dim, 12.0).unwrap();
            for trial in 0..300 {
                let c = random_config(50, torus, phi.effective_radius(), 1000 * k as u64 + trial);
                let mut y = [0.0; 3];
                for x in y.iter_mut().take(dim) {
                    *x = rng.random::<f64>() * 12.0;
                }
                let fast = interaction_energy(&y, &c, &phi, None);
                let slow = brute_energy(&y, &c, &phi, None);
                assert!((fast - slow).abs() <= 1e-12, "{fast} vs {slow}");
            }
        }
    }

    #[test]
    fn free_rate_is_kernel() {
        let torus = Torus::new(1, 10.0).unwrap();
        let a = KernelSpec::top_hat(1.0, 0.7, 1).unwrap();
        let d = Dynamics::new(torus, a, PotentialSpec::zero(1).unwrap(), 1.0).unwrap();
        let c = d.configuration(vec![[1.0, 0.0, 0.0], [1.2, 0.0, 0.0]]).unwrap();
        assert_eq!(d.jump_rate(&c, 0, &[1.5, 0.0, 0.0]), 0.7);
        assert_eq!(d.jump_rate(&c, 0, &[2.5, 0.0, 0.0]), 0.0);
    }

    #[test]
    fn rate_matches_direct_formula() {
        let torus = Torus::new(2, 20.0).unwrap();
        let a = KernelSpec::gaussian(0.6, 1.3, 2).unwrap();
        let phi = PotentialSpec::top_hat(0.8, 0.9, 2).unwrap();
        let d = Dynamics::new(torus, a, phi, 1.0).unwrap();
        let mut rng = stream(5, 5);
        for trial in 0..200 {
            let c = d.configuration(random_config(20, torus, 0.8, trial).positions().to_vec()).unwrap();
            let x = rng.random_range(0..20);
            let y = [rng.random::<f64>() * 20.0, rng.random::<f64>() * 20.0, 0.0];
            let xs = c.positions()[x];
            let dx = torus.displacement(&xs, &y);
            let direct_a = 1.3 * (-(dx[0] * dx[0] + dx[1] * dx[1]) / (2.0 * 0.36)).exp();
            let energy: f64 = c
                .positions()
                .iter()
                .map(|z| if torus.distance(&y, z) <= 0.8 { 0.9 } else { 0.0 })
                .sum();
            let expected = if direct_a < 1.3e-12 { 0.0 } else { direct_a * (-energy).exp() };
            assert_relative_eq!(d.jump_rate(&c, x, &y), expected, max_relative = 1e-12, epsilon = 1e-300);
        }
    }

    #[test]
    fn single_particle_sees_itself() {
        let torus = Torus::new(1, 10.0).unwrap();
        let a = KernelSpec::top_hat(1.0, 1.0, 1).unwrap();
        let phi = PotentialSpec::top_hat(2.0, 0.5, 1).unwrap();
        let d = Dynamics::new(torus, a, phi, 0.8).unwrap();
        let c = d.configuration(vec![[4.0, 0.0, 0.0]]).unwrap();
        let y = [4.6, 0.0, 0.0];
        assert_relative_eq!(d.jump_rate(&c, 0, &y), (-0.8f64 * 0.5).exp(), max_relative = 1e-15);
        let d = d.excluding_mover();
        assert_eq!(d.jump_rate(&c, 0, &y), 1.0);
    }

    #[test]
    fn step_on_empty_configuration_fails() {
        let torus = Torus::new(1, 10.0).unwrap();
        let d = Dynamics::new(torus, KernelSpec::top_hat(1.0, 1.0, 1).unwrap(), PotentialSpec::zero(1).unwrap(), 1.0).unwrap();
        let mut c = d.configuration(vec![]).unwrap();
        let mut clock = 0.0;
        assert!(matches!(d.gillespie_step(&mut c, &mut clock, &mut stream(1, 1)), Err(Error::NoDynamics)));
    }

    #[test]
    fn free_dynamics_accepts_every_proposal() {
        let torus = Torus::new(1, 10.0).unwrap();
        let d = Dynamics::new(torus, KernelSpec::top_hat(1.0, 1.0, 1).unwrap(), PotentialSpec::zero(1).unwrap(), 1.0).unwrap();
        let mut c = d.configuration(vec![[1.0, 0.0, 0.0], [5.0, 0.0, 0.0]]).unwrap();
        let mut clock = 0.0;
        let mut rng = stream(2, 0);
        let n = 20_000;
        for _ in 0..n {
            let prev = clock;
            let e = d.gillespie_step(&mut c, &mut clock, &mut rng).unwrap();
            assert!(e.accepted && e.time > prev);
        }
        // Accepted jumps per particle per unit time equal alpha = 2.
        let rate = n as f64 / (2.0 * clock);
        assert!((rate - 2.0).abs() < 3.0 * 2.0 / (n as f64).sqrt());
        assert!(c.index_is_consistent());
    }

    #[test]
    fn geometry_guard() {
        let torus = Torus::new(1, 4.0).unwrap();
        let err = Dynamics::new(torus, KernelSpec::top_hat(1.0, 1.0, 1).unwrap(), PotentialSpec::zero(1).unwrap(), 1.0)
            .unwrap_err();
        assert!(matches!(err, Error::InvalidGeometry { rule: "minimal-image ambiguity", .. }));
        assert!(Dynamics::new(
            Torus::new(1, 40.0).unwrap(),
            KernelSpec::top_hat(1.0, 1.0, 1).unwrap(),
            PotentialSpec::local(1.0, 1).unwrap(),
            1.0
        )
        .is_err());
    }

    #[test]
    fn detailed_balance_examples() {
        let zero = PotentialSpec::zero(1).unwrap();
        let c = line(&[1.0, 2.0, 3.0], 10.0, 1.0);
        assert_eq!(detailed_balance_residual(&c, 0, &[1.3, 0.0, 0.0], &zero), 0.0);

        // Two particles: hand expansion. E(gamma) = phi(x-z), E(y,gamma) = phi(y-z) + phi(y-x),
        // E(gamma') = phi(y-z), E(x, gamma') = phi(x-z) + phi(x-y).
        let phi = PotentialSpec::gaussian(0.7, 1.9, 1).unwrap();
        let c = line(&[2.0, 2.5], 10.0, phi.effective_radius());
        let (x, z, y) = (2.0f64, 2.5f64, 2.9f64);
        let f = |r: f64| phi.value_at_radius(r.abs());
        let by_hand = (f(x - z) + f(y - z) + f(y - x)) - (f(y - z) + f(x - z) + f(x - y));
        assert_eq!(by_hand, 0.0);
        let r = detailed_balance_residual(&c, 0, &[y, 0.0, 0.0], &phi);
        assert!(r.abs() <= 1e-12);
    }
}
