use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::rng::{stream, StreamRng};

use super::{sample_poisson_initial, Configuration, Dynamics, Event, InitialDensity};

/// Recorded path of one simulation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub base_seed: u64,
    pub stream: u64,
    pub initial_count: usize,
    pub snapshot_times: Vec<f64>,
    /// Configuration at each snapshot time (after all events up to that time).
    pub snapshots: Vec<Vec<Point>>,
    /// Every proposal, accepted or not; empty unless event recording is on.
    pub events: Vec<Event>,
    pub proposals: u64,
    pub accepted: u64,
    /// Time of the last processed proposal.
    pub final_time: f64,
    pub final_positions: Vec<Point>,
}

impl Trajectory {
    pub fn snapshot(&self, index: usize) -> Option<&[Point]> {
        self.snapshots.get(index).map(Vec::as_slice)
    }

    /// Particle number is the same at every snapshot and at the end.
    pub fn conserves_particles(&self) -> bool {
        self.snapshots.iter().all(|s| s.len() == self.initial_count) && self.final_positions.len() == self.initial_count
    }
}

/// An ensemble of independent trajectories from Poisson initial data.
#[derive(Debug, Clone)]
pub struct EnsembleSpec {
    pub dynamics: Dynamics,
    pub initial: InitialDensity,
    pub snapshot_times: Vec<f64>,
    /// Simulation stops at the first proposal later than this.
    pub t_end: f64,
    /// Optional cap on the number of proposals per trajectory.
    pub max_proposals: Option<u64>,
    pub n_trajectories: usize,
    pub base_seed: u64,
    /// Added to the trajectory index to form the stream id.
    pub stream_offset: u64,
    pub record_events: bool,
}

impl EnsembleSpec {
    fn validate(&self) -> Result<()> {
        if self.n_trajectories == 0 {
            return Err(Error::InvalidInput("at least one trajectory is required".into()));
        }
        validate_times(&self.snapshot_times, self.t_end)
    }

    fn run_one(&self, index: usize) -> Result<Trajectory> {
        let stream_id = self.stream_offset + index as u64;
        let mut rng = stream(self.base_seed, stream_id);
        let config = sample_poisson_initial(
            self.dynamics.torus(),
            &self.initial,
            self.dynamics.potential().effective_radius(),
            &mut rng,
        )?;
        run_trajectory(&self.dynamics, config, self, stream_id, &mut rng)
    }
}

fn validate_times(times: &[f64], t_end: f64) -> Result<()> {
    if !(t_end.is_finite() && t_end >= 0.0) {
        return Err(Error::InvalidInput(format!("t_end must be finite and non-negative, got {t_end}")));
    }
    if times.iter().any(|t| !(t.is_finite() && *t >= 0.0 && *t <= t_end)) {
        return Err(Error::InvalidInput("snapshot times must lie in [0, t_end]".into()));
    }
    if times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidInput("snapshot times must be non-decreasing".into()));
    }
    Ok(())
}

fn run_trajectory(
    dynamics: &Dynamics,
    mut config: Configuration,
    spec: &EnsembleSpec,
    stream_id: u64,
    rng: &mut StreamRng,
) -> Result<Trajectory> {
    let mut traj = Trajectory {
        base_seed: spec.base_seed,
        stream: stream_id,
        initial_count: config.len(),
        snapshot_times: spec.snapshot_times.clone(),
        snapshots: Vec::with_capacity(spec.snapshot_times.len()),
        events: Vec::new(),
        proposals: 0,
        accepted: 0,
        final_time: 0.0,
        final_positions: Vec::new(),
    };
    let mut pending = spec.snapshot_times.iter().peekable();
    let mut clock = 0.0;
    if !config.is_empty() {
        loop {
            if spec.max_proposals.is_some_and(|m| traj.proposals >= m) {
                break;
            }
            let next = dynamics.next_proposal_time(&config, clock, rng)?;
            while let Some(&&t) = pending.peek() {
                if t < next {
                    traj.snapshots.push(config.positions().to_vec());
                    pending.next();
                } else {
                    break;
                }
            }
            if next > spec.t_end {
                break;
            }
            clock = next;
            let event = dynamics.propose(&mut config, next, rng);
            traj.proposals += 1;
            traj.accepted += u64::from(event.accepted);
            if spec.record_events {
                traj.events.push(event);
            }
        }
    }
    // Snapshots not yet taken: either nothing moves (empty box) or the
    // proposal cap stopped the run early and they are left out.
    if config.is_empty() {
        for _ in pending {
            traj.snapshots.push(Vec::new());
        }
    }
    traj.final_time = clock;
    traj.final_positions = config.positions().to_vec();
    Ok(traj)
}

/// Runs the ensemble on the rayon pool. Results equal [`simulate_ensemble_serial`].
pub fn simulate_ensemble(spec: &EnsembleSpec) -> Result<Vec<Trajectory>> {
    spec.validate()?;
    (0..spec.n_trajectories).into_par_iter().map(|i| spec.run_one(i)).collect()
}

pub fn simulate_ensemble_serial(spec: &EnsembleSpec) -> Result<Vec<Trajectory>> {
    spec.validate()?;
    (0..spec.n_trajectories).map(|i| spec.run_one(i)).collect()
}

/// Runs one trajectory from each supplied initial configuration; trajectory
/// `i` uses stream `spec.stream_offset + i`. The spec's `initial` and
/// `n_trajectories` are ignored.
pub fn simulate_from(spec: &EnsembleSpec, initials: Vec<Configuration>) -> Result<Vec<Trajectory>> {
    validate_times(&spec.snapshot_times, spec.t_end)?;
    initials
        .into_par_iter()
        .enumerate()
        .map(|(i, config)| {
            let stream_id = spec.stream_offset + i as u64;
            let mut rng = stream(spec.base_seed, stream_id);
            run_trajectory(&spec.dynamics, config, spec, stream_id, &mut rng)
        })
        .collect()
}
