//! A-priori bounds along kinetic trajectories: Gronwall growth
//! `u_t <= u_0 e^{alpha t}`, the short-window invariant region
//! `u_t <= u_0 / (2 - e^{alpha t})`, positivity and, for the local potential,
//! the maximum principle.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::KineticTrajectory;

const RELATIVE_SLACK: f64 = 1e-9;
const MAX_PRINCIPLE_SLACK: f64 = 1e-6;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundCheck {
    pub time: f64,
    pub sup: f64,
    pub min: f64,
    pub gronwall_limit: f64,
    pub invariant_limit: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundViolation {
    pub bound: &'static str,
    pub time: f64,
    /// Amount by which the bound was exceeded.
    pub margin: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundReport {
    pub u0: f64,
    pub alpha: f64,
    pub local: bool,
    pub checks: Vec<BoundCheck>,
    pub violations: Vec<BoundViolation>,
}

impl BoundReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn into_result(self) -> Result<Self> {
        match self.violations.first() {
            None => Ok(self),
            Some(v) => Err(Error::BoundViolation {
                bound: v.bound,
                time: v.time,
                margin: v.margin,
            }),
        }
    }
}

pub fn monitor_bounds(traj: &KineticTrajectory, alpha: f64, local: bool) -> Result<BoundReport> {
    let first = traj
        .values
        .first()
        .ok_or_else(|| Error::InvalidInput("empty kinetic trajectory".into()))?;
    let u0 = first.iter().copied().fold(0.0, f64::max);
    let mut report = BoundReport {
        u0,
        alpha,
        local,
        checks: Vec::with_capacity(traj.times.len()),
        violations: Vec::new(),
    };
    for (&t, values) in traj.times.iter().zip(&traj.values) {
        let sup = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let growth = (alpha * t).exp();
        let gronwall = u0 * growth;
        let invariant = (growth < 2.0).then(|| u0 / (2.0 - growth));
        let mut fail = |bound: &'static str, margin: f64| {
            if margin > 0.0 {
                report.violations.push(BoundViolation { bound, time: t, margin });
            }
        };
        fail("gronwall", sup - gronwall * (1.0 + RELATIVE_SLACK));
        // Product ansatz at two and three points: (u_t)^n <= (u_0)^n e^{n alpha t}.
        for n in [2, 3] {
            fail("gronwall-product", sup.powi(n) - gronwall.powi(n) * (1.0 + RELATIVE_SLACK));
        }
        if let Some(limit) = invariant {
            fail("invariant-region", sup - limit * (1.0 + RELATIVE_SLACK));
        }
        if local {
            fail("maximum-principle", sup - (u0 + MAX_PRINCIPLE_SLACK));
        }
        fail("positivity", -min);
        report.checks.push(BoundCheck {
            time: t,
            sup,
            min,
            gronwall_limit: gronwall,
            invariant_limit: invariant,
        });
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Grid;
    use crate::geometry::Torus;

    fn traj(times: Vec<f64>, values: Vec<Vec<f64>>) -> KineticTrajectory {
        KineticTrajectory {
            grid: Grid::new(Torus::new(1, 1.0).unwrap(), values[0].len()).unwrap(),
            times,
            values,
        }
    }

    #[test]
    fn constant_trajectory_passes() {
        let t = traj(vec![0.0, 1.0, 2.0], vec![vec![0.5; 4]; 3]);
        let r = monitor_bounds(&t, 1.0, true).unwrap();
        assert!(r.passed());
        assert_eq!(r.checks.len(), 3);
        assert!(r.checks[2].invariant_limit.is_none());
    }

    #[test]
    fn violations_name_time_and_margin() {
        let t = traj(vec![0.0, 0.1], vec![vec![1.0, 0.0], vec![1.5, -0.1]]);
        let r = monitor_bounds(&t, 1.0, false).unwrap();
        let names: Vec<_> = r.violations.iter().map(|v| v.bound).collect();
        assert!(names.contains(&"gronwall"));
        assert!(names.contains(&"invariant-region"));
        assert!(names.contains(&"positivity"));
        let err = r.into_result().unwrap_err();
        assert!(matches!(err, Error::BoundViolation { time, .. } if time == 0.1));
        let local = monitor_bounds(&traj(vec![0.0, 0.1], vec![vec![1.0], vec![1.01]]), 1.0, true).unwrap();
        assert_eq!(local.violations[0].bound, "maximum-principle");
    }
}
