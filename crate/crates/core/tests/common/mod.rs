//! Shared fixtures for the integration tests.
#![allow(dead_code)]

use kawasaki::geometry::{Point, Torus};
use kawasaki::rng::StreamRng;
use kawasaki::simulator::{interaction_energy, Configuration};
use kawasaki::PotentialSpec;
use rand::Rng;

/// Canonical Gibbs state `exp(-epsilon H)` with `N` fixed, sampled by
/// single-particle Metropolis moves with uniform steps in `[-step, step]^d`.
pub struct Metropolis {
    pub torus: Torus,
    pub potential: PotentialSpec,
    pub epsilon: f64,
    pub step: f64,
}

impl Metropolis {
    /// Returns the configuration after `sweeps * n` attempted moves, started uniformly.
    pub fn sample(&self, n: usize, sweeps: usize, rng: &mut StreamRng) -> Configuration {
        let dim = self.torus.dim;
        let positions: Vec<Point> = (0..n)
            .map(|_| {
                let mut p = [0.0; 3];
                for x in p.iter_mut().take(dim) {
                    *x = self.torus.length * rng.random::<f64>();
                }
                p
            })
            .collect();
        let mut config = Configuration::new(self.torus, positions, self.potential.effective_radius()).unwrap();
        for _ in 0..sweeps * n {
            let i = rng.random_range(0..n);
            let from = config.positions()[i];
            let mut shift = [0.0; 3];
            for s in shift.iter_mut().take(dim) {
                *s = self.step * (2.0 * rng.random::<f64>() - 1.0);
            }
            let to = self.torus.translate(&from, &shift);
            let delta = interaction_energy(&to, &config, &self.potential, Some(i))
                - interaction_energy(&from, &config, &self.potential, Some(i));
            let u: f64 = rng.random();
            if u < (-self.epsilon * delta).exp() {
                config.move_particle(i, to);
            }
        }
        config
    }
}

pub fn line_torus(length: f64) -> Torus {
    Torus::new(1, length).unwrap()
}
