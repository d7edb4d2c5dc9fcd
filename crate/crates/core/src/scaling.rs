//! Vlasov scaling sweeps.
//!
//! For each `epsilon` the particle system runs with potential `epsilon phi`
//! from a Poisson state of intensity `rho0 / epsilon`. The empirical
//! correlation functions, rescaled by `epsilon^n`, are compared bin by bin with
//! the kinetic solution started from `rho0`.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::estimator::{estimate_correlations, radial_product, snapshots_at, CorrelationEstimate, RadialBins};
use crate::field::{DensityField, Grid};
use crate::geometry::MAX_DIM;
use crate::kernels::{KernelSpec, PotentialSpec};
use crate::kinetic::{solve_rk4, KineticModel, KineticTrajectory, SolverConfig};
use crate::simulator::{simulate_ensemble, Dynamics, EnsembleSpec, InitialDensity};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub kernel: KernelSpec,
    pub potential: PotentialSpec,
    /// Kinetic initial density; its grid also fixes the torus.
    pub rho0: DensityField,
    /// Strictly decreasing, in `(0, 1]`.
    pub epsilons: Vec<f64>,
    pub times: Vec<f64>,
    /// Trajectories at `epsilon = 1`; each rung runs `ceil(n * epsilon)`.
    pub n_traj_base: usize,
    /// Estimator cells per axis; must divide the kinetic grid.
    pub estimator_cells: usize,
    pub radial_bins: RadialBins,
    /// Kinetic time step.
    pub dt: f64,
    pub seed: u64,
    /// Upper bound on the expected particle number `epsilon^-1 ∫ rho0`.
    pub particle_budget: f64,
    pub exclude_mover: bool,
}

impl SweepSpec {
    pub fn grid(&self) -> &Grid {
        self.rho0.grid()
    }

    pub fn n_traj(&self, epsilon: f64) -> usize {
        ((self.n_traj_base as f64 * epsilon).ceil() as usize).max(1)
    }

    pub fn expected_particles(&self, epsilon: f64) -> f64 {
        self.rho0.mass() / epsilon
    }

    pub fn estimator_grid(&self) -> Result<Grid> {
        Grid::new(self.grid().torus, self.estimator_cells)
    }

    /// Structural checks followed by the particle budget.
    pub fn validate(&self) -> Result<()> {
        if self.epsilons.is_empty() {
            return Err(Error::InvalidInput("need at least one epsilon".into()));
        }
        if self.epsilons.iter().any(|e| !(e.is_finite() && *e > 0.0 && *e <= 1.0)) {
            return Err(Error::InvalidInput("every epsilon must lie in (0, 1]".into()));
        }
        if self.epsilons.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::InvalidInput("epsilons must be strictly decreasing".into()));
        }
        if self.times.is_empty() || self.times.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
            return Err(Error::InvalidInput("comparison times must be non-negative".into()));
        }
        if self.times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidInput("comparison times must be strictly increasing".into()));
        }
        if self.n_traj_base == 0 {
            return Err(Error::InvalidInput("n_traj_base must be positive".into()));
        }
        let n = self.grid().n_cells;
        if self.estimator_cells == 0 || n % self.estimator_cells != 0 {
            return Err(Error::InvalidInput(format!(
                "estimator cells {} must divide the kinetic grid {n}",
                self.estimator_cells
            )));
        }
        self.radial_bins.validate(&self.grid().torus)?;
        Dynamics::new(self.grid().torus, self.kernel, self.potential, 1.0)?;
        SolverConfig::rk4(self.dt, self.t_end()).validate(self.kernel.alpha())?;
        self.check_budget()
    }

    pub fn check_budget(&self) -> Result<()> {
        for &eps in &self.epsilons {
            let expected = self.expected_particles(eps);
            if expected > self.particle_budget {
                return Err(Error::Budget(format!(
                    "epsilon = {eps} needs {expected:.1} particles per trajectory, budget is {}",
                    self.particle_budget
                )));
            }
        }
        Ok(())
    }

    pub fn t_end(&self) -> f64 {
        self.times.last().copied().unwrap_or(0.0)
    }
}

/// `k1 -> epsilon k1`, `k2 -> epsilon^2 k2`.
pub fn renormalize(estimate: &CorrelationEstimate, epsilon: f64) -> CorrelationEstimate {
    estimate.renormalized(epsilon)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub epsilon: f64,
    pub time: f64,
    pub n_traj: usize,
    /// `sup_b |epsilon k1_b - rho_t,b|`.
    pub e1: f64,
    pub e1_stderr: f64,
    /// Largest per-bin deviation in standard errors.
    pub e1_max_z: f64,
    /// `sup_b |epsilon^2 k2_b - (rho_t (x) rho_t)_b|`.
    pub e2: f64,
    pub e2_stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RungEstimates {
    pub epsilon: f64,
    pub n_traj: usize,
    pub conserved: bool,
    /// Renormalised estimates, one per comparison time.
    pub estimates: Vec<CorrelationEstimate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    pub rungs: Vec<RungEstimates>,
    /// Kinetic reference block-averaged onto the estimator cells, per time.
    pub reference: Vec<Vec<f64>>,
    /// `e1` never grows by more than two combined standard errors down the ladder.
    pub monotone_within_noise: bool,
    pub e2_monotone_within_noise: bool,
}

impl SweepResult {
    pub fn rows_at(&self, time: f64) -> Vec<&SweepRow> {
        self.rows.iter().filter(|r| r.time == time).collect()
    }
}

/// Kinetic solution at arbitrary times, linearly interpolated between steps.
pub fn kinetic_reference(spec: &SweepSpec) -> Result<(KineticModel, KineticTrajectory)> {
    let model = KineticModel::new(spec.kernel, spec.potential, *spec.grid())?;
    let traj = solve_rk4(&model, &spec.rho0, &SolverConfig::rk4(spec.dt, spec.t_end()), 1)?;
    Ok((model, traj))
}

fn interpolate(traj: &KineticTrajectory, t: f64) -> Vec<f64> {
    let k = traj.times.partition_point(|s| *s < t);
    if k == 0 {
        return traj.values[0].clone();
    }
    if k >= traj.times.len() {
        return traj.values.last().unwrap().clone();
    }
    let (t0, t1) = (traj.times[k - 1], traj.times[k]);
    if (t1 - t).abs() <= 1e-12 * t1.max(1.0) {
        return traj.values[k].clone();
    }
    let w = (t - t0) / (t1 - t0);
    traj.values[k - 1]
        .iter()
        .zip(&traj.values[k])
        .map(|(a, b)| (1.0 - w) * a + w * b)
        .collect()
}

/// Cell averages of a piecewise-constant fine field over the cells of `coarse`.
/// The grids need not nest; fine cells straddling a coarse boundary are split
/// by overlap.
pub fn block_average(fine: &Grid, values: &[f64], coarse: &Grid) -> Vec<f64> {
    let dim = fine.dim();
    let (hf, hc) = (fine.spacing(), coarse.spacing());
    // Per axis: fine index -> list of (coarse index, overlap fraction of the fine cell).
    let overlaps: Vec<Vec<(usize, f64)>> = (0..fine.n_cells)
        .map(|i| {
            let (lo, hi) = (i as f64 * hf, (i + 1) as f64 * hf);
            let first = ((lo / hc) as usize).min(coarse.n_cells - 1);
            let mut out = Vec::new();
            for j in first..coarse.n_cells {
                let (clo, chi) = (j as f64 * hc, (j + 1) as f64 * hc);
                if clo >= hi {
                    break;
                }
                let w = (hi.min(chi) - lo.max(clo)) / hf;
                if w > 0.0 {
                    out.push((j, w));
                }
            }
            out
        })
        .collect();
    let scale = fine.cell_volume() / coarse.cell_volume();
    let mut sums = vec![0.0; coarse.len()];
    for (flat, v) in values.iter().enumerate() {
        let idx = fine.multi_index(flat);
        let mut stack: Vec<([usize; MAX_DIM], f64)> = vec![([0; MAX_DIM], 1.0)];
        for k in 0..dim {
            stack = stack
                .into_iter()
                .flat_map(|(c, w)| {
                    overlaps[idx[k]].iter().map(move |&(j, f)| {
                        let mut c = c;
                        c[k] = j;
                        (c, w * f)
                    })
                })
                .collect();
        }
        for (c, w) in stack {
            sums[coarse.flat_index(&c)] += v * w * scale;
        }
    }
    sums
}

fn sup_deviation(values: &[f64], stderr: &[f64], reference: &[f64]) -> (f64, f64, f64) {
    let mut sup = 0.0;
    let mut se_at = 0.0;
    let mut max_z: f64 = 0.0;
    for ((v, s), r) in values.iter().zip(stderr).zip(reference) {
        let dev = (v - r).abs();
        if dev > sup {
            sup = dev;
            se_at = *s;
        }
        let z = if *s > 0.0 { dev / s } else if dev == 0.0 { 0.0 } else { f64::INFINITY };
        max_z = max_z.max(z);
    }
    (sup, se_at, max_z)
}

fn monotone(rows: &[SweepRow], times: &[f64], pick: impl Fn(&SweepRow) -> (f64, f64)) -> bool {
    times.iter().all(|&t| {
        let at: Vec<_> = rows.iter().filter(|r| r.time == t).collect();
        at.windows(2).all(|w| {
            let (a, sa) = pick(w[0]);
            let (b, sb) = pick(w[1]);
            b <= a + 2.0 * (sa * sa + sb * sb).sqrt()
        })
    })
}

pub fn run_sweep(spec: &SweepSpec) -> Result<SweepResult> {
    spec.validate()?;
    let (_, kinetic) = kinetic_reference(spec)?;
    let fine = *spec.grid();
    let coarse = spec.estimator_grid()?;
    let torus = fine.torus;
    let fields: Vec<Vec<f64>> = spec.times.iter().map(|&t| interpolate(&kinetic, t)).collect();
    let reference: Vec<Vec<f64>> = fields.iter().map(|f| block_average(&fine, f, &coarse)).collect();
    let products = fields
        .iter()
        .map(|f| radial_product(&fine, f, None, &spec.radial_bins))
        .collect::<Result<Vec<_>>>()?;

    let mut rows = Vec::new();
    let mut rungs = Vec::new();
    for (k, &eps) in spec.epsilons.iter().enumerate() {
        let mut dynamics = Dynamics::new(torus, spec.kernel, spec.potential, eps)?;
        if spec.exclude_mover {
            dynamics = dynamics.excluding_mover();
        }
        let n_traj = spec.n_traj(eps);
        let ensemble = EnsembleSpec {
            dynamics,
            initial: InitialDensity::Field(spec.rho0.scaled(1.0 / eps)?),
            snapshot_times: spec.times.clone(),
            t_end: spec.t_end(),
            max_proposals: None,
            n_trajectories: n_traj,
            base_seed: spec.seed,
            stream_offset: (k as u64) << 32,
            record_events: false,
        };
        let trajectories = simulate_ensemble(&ensemble)?;
        let conserved = trajectories.iter().all(|t| t.conserves_particles());
        let mut estimates = Vec::with_capacity(spec.times.len());
        for (i, &t) in spec.times.iter().enumerate() {
            let snaps = snapshots_at(&trajectories, i)?;
            let est = renormalize(&estimate_correlations(&snaps, t, coarse, spec.radial_bins)?, eps);
            let (e1, e1_stderr, e1_max_z) = sup_deviation(&est.k1.values, &est.k1.stderr, &reference[i]);
            let (e2, e2_stderr, _) = sup_deviation(&est.k2_radial.values, &est.k2_radial.stderr, &products[i].values);
            rows.push(SweepRow {
                epsilon: eps,
                time: t,
                n_traj,
                e1,
                e1_stderr,
                e1_max_z,
                e2,
                e2_stderr,
            });
            estimates.push(est);
        }
        rungs.push(RungEstimates {
            epsilon: eps,
            n_traj,
            conserved,
            estimates,
        });
    }
    let monotone_within_noise = monotone(&rows, &spec.times, |r| (r.e1, r.e1_stderr));
    let e2_monotone_within_noise = monotone(&rows, &spec.times, |r| (r.e2, r.e2_stderr));
    Ok(SweepResult {
        rows,
        rungs,
        reference,
        monotone_within_noise,
        e2_monotone_within_noise,
    })
}

/// Log-log fit of `e1` against `epsilon`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub time: f64,
    pub epsilons: Vec<f64>,
    pub errors: Vec<f64>,
    /// `None` when any error is zero or fewer than two rungs exist.
    pub slope: Option<f64>,
    pub intercept: Option<f64>,
    /// 95% interval; needs at least three rungs.
    pub slope_ci95: Option<(f64, f64)>,
    pub note: Option<String>,
}

/// Ordinary least squares of `ln e` on `ln epsilon` with a Student-t interval.
pub fn log_log_slope(epsilons: &[f64], errors: &[f64]) -> (Option<f64>, Option<f64>, Option<(f64, f64)>, Option<String>) {
    if epsilons.len() < 2 || epsilons.len() != errors.len() {
        return (None, None, None, Some("need at least two epsilon values".into()));
    }
    if errors.iter().any(|e| !(e.is_finite() && *e > 0.0)) {
        return (None, None, None, Some("slope undefined: some errors are zero".into()));
    }
    let x: Vec<f64> = epsilons.iter().map(|e| e.ln()).collect();
    let y: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    if sxx == 0.0 {
        return (None, None, None, Some("slope undefined: epsilons coincide".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ci = if x.len() >= 3 {
        let rss: f64 = x.iter().zip(&y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
        let df = n - 2.0;
        let se = (rss / df / sxx).sqrt();
        let t = StudentsT::new(0.0, 1.0, df).expect("positive degrees of freedom").inverse_cdf(0.975);
        Some((slope - t * se, slope + t * se))
    } else {
        None
    };
    (Some(slope), Some(intercept), ci, None)
}

/// Fit at `time`, or at the last comparison time when `None`.
pub fn convergence_report(result: &SweepResult, time: Option<f64>) -> Result<ConvergenceReport> {
    let time = match time {
        Some(t) => t,
        None => result
            .rows
            .iter()
            .map(|r| r.time)
            .fold(None, |acc: Option<f64>, t| Some(acc.map_or(t, |a| a.max(t))))
            .ok_or_else(|| Error::InvalidInput("empty sweep result".into()))?,
    };
    let rows = result.rows_at(time);
    if rows.len() < 2 {
        return Err(Error::InvalidInput("convergence report needs at least two epsilon values".into()));
    }
    let epsilons: Vec<f64> = rows.iter().map(|r| r.epsilon).collect();
    let errors: Vec<f64> = rows.iter().map(|r| r.e1).collect();
    let (slope, intercept, slope_ci95, note) = log_log_slope(&epsilons, &errors);
    Ok(ConvergenceReport {
        time,
        epsilons,
        errors,
        slope,
        intercept,
        slope_ci95,
        note,
    })
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

/// `epsilon,e1,ln_epsilon,ln_e1`.
pub fn write_convergence_csv(report: &ConvergenceReport, dir: &Path) -> Result<()> {
    let mut out = create(dir, "convergence.csv")?;
    writeln!(out, "epsilon,e1,ln_epsilon,ln_e1")?;
    for (e, v) in report.epsilons.iter().zip(&report.errors) {
        writeln!(out, "{e},{v},{},{}", e.ln(), v.ln())?;
    }
    out.flush()?;
    Ok(())
}

/// Writes `errors.csv`, per-rung estimate CSVs, `convergence.csv` and `report.json`.
pub fn write_sweep_outputs(result: &SweepResult, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut out = create(dir, "errors.csv")?;
    writeln!(out, "epsilon,time,e1,e1_stderr,e2,e2_stderr")?;
    for r in &result.rows {
        writeln!(out, "{},{},{},{},{},{}", r.epsilon, r.time, r.e1, r.e1_stderr, r.e2, r.e2_stderr)?;
    }
    out.flush()?;
    for (k, rung) in result.rungs.iter().enumerate() {
        for (i, est) in rung.estimates.iter().enumerate() {
            let stem = format!("eps{k}_t{i}");
            let mut k1 = create(dir, &format!("{stem}_k1.csv"))?;
            est.k1.write_csv(&mut k1)?;
            k1.flush()?;
            let mut k2 = create(dir, &format!("{stem}_k2.csv"))?;
            est.k2_radial.write_csv(&mut k2)?;
            k2.flush()?;
            let mut meta = est.metadata();
            meta["epsilon"] = serde_json::json!(rung.epsilon);
            serde_json::to_writer_pretty(create(dir, &format!("{stem}.json"))?, &meta)?;
        }
    }
    let convergence = if result.rungs.len() >= 2 {
        let c = convergence_report(result, None)?;
        write_convergence_csv(&c, dir)?;
        Some(c)
    } else {
        None
    };
    let report = serde_json::json!({
        "rows": result.rows,
        "monotone_within_noise": result.monotone_within_noise,
        "e2_monotone_within_noise": result.e2_monotone_within_noise,
        "conserved": result.rungs.iter().all(|r| r.conserved),
        "convergence": convergence,
    });
    serde_json::to_writer_pretty(create(dir, "report.json")?, &report)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Torus;

    fn free_spec() -> SweepSpec {
        let grid = Grid::new(Torus::new(1, 20.0).unwrap(), 64).unwrap();
        SweepSpec {
            kernel: KernelSpec::top_hat(1.0, 0.5, 1).unwrap(),
            potential: PotentialSpec::zero(1).unwrap(),
            rho0: DensityField::from_fn(grid, |p| 0.5 + 0.3 * (-(p[0] - 10.0).powi(2) / 4.0).exp()).unwrap(),
            epsilons: vec![1.0, 0.5],
            times: vec![0.0, 0.5],
            n_traj_base: 400,
            estimator_cells: 16,
            radial_bins: RadialBins::new(2.0, 4),
            dt: 1e-2,
            seed: 3,
            particle_budget: 1e3,
            exclude_mover: false,
        }
    }

    #[test]
    fn synthetic_power_laws() {
        let eps: [f64; 4] = [1.0, 0.5, 0.25, 0.125];
        for p in [1.0, 2.0] {
            let errs: Vec<f64> = eps.iter().map(|e| 0.3 * e.powf(p)).collect();
            let (slope, _, ci, _) = log_log_slope(&eps, &errs);
            assert!((slope.unwrap() - p).abs() < 1e-6);
            let (lo, hi) = ci.unwrap();
            assert!(lo <= p + 1e-9 && hi >= p - 1e-9);
        }
        let (slope, _, _, note) = log_log_slope(&eps, &[0.0; 4]);
        assert!(slope.is_none() && note.is_some());
    }

    #[test]
    fn budget_is_checked_before_simulating() {
        let mut spec = free_spec();
        spec.particle_budget = 20.0;
        assert!(matches!(run_sweep(&spec), Err(Error::Budget(_))));
        spec.particle_budget = 1e3;
        spec.epsilons = vec![0.5, 1.0];
        assert!(matches!(run_sweep(&spec), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn block_average_splits_straddling_cells() {
        let fine = Grid::new(Torus::new(1, 3.0).unwrap(), 3).unwrap();
        let coarse = Grid::new(Torus::new(1, 3.0).unwrap(), 2).unwrap();
        let avg = block_average(&fine, &[1.0, 2.0, 3.0], &coarse);
        assert!((avg[0] - 4.0 / 3.0).abs() < 1e-14 && (avg[1] - 8.0 / 3.0).abs() < 1e-14);

        let torus = Torus::new(2, 20.0).unwrap();
        let fine = Grid::new(torus, 26).unwrap();
        let coarse = Grid::new(torus, 10).unwrap();
        let values: Vec<f64> = (0..fine.len()).map(|i| (i % 7) as f64).collect();
        let avg = block_average(&fine, &values, &coarse);
        let mass_fine = values.iter().sum::<f64>() * fine.cell_volume();
        let mass_coarse = avg.iter().sum::<f64>() * coarse.cell_volume();
        assert!((mass_fine - mass_coarse).abs() < 1e-10 * mass_fine);
        let flat = block_average(&fine, &vec![0.7; fine.len()], &coarse);
        assert!(flat.iter().all(|v| (v - 0.7).abs() < 1e-13));
    }

    #[test]
    fn block_average_preserves_mean() {
        let spec = free_spec();
        let coarse = spec.estimator_grid().unwrap();
        let avg = block_average(spec.grid(), spec.rho0.values(), &coarse);
        let fine_mean = spec.rho0.values().iter().sum::<f64>() / 64.0;
        let coarse_mean = avg.iter().sum::<f64>() / 16.0;
        assert!((fine_mean - coarse_mean).abs() < 1e-14);
    }

    #[test]
    fn free_sweep_matches_kinetic_within_noise() {
        let spec = free_spec();
        let result = run_sweep(&spec).unwrap();
        assert_eq!(result.rows.len(), 4);
        assert!(result.rungs.iter().all(|r| r.conserved));
        assert_eq!(result.rungs[1].n_traj, 200);
        for row in &result.rows {
            assert!(row.e1_max_z <= 4.0, "{row:?}");
        }
        let dir = tempfile::tempdir().unwrap();
        write_sweep_outputs(&result, dir.path()).unwrap();
        let errors = std::fs::read_to_string(dir.path().join("errors.csv")).unwrap();
        assert!(errors.starts_with("epsilon,time,e1,e1_stderr,e2,e2_stderr\n"));
        assert_eq!(errors.lines().count(), 5);
        assert!(dir.path().join("eps1_t1_k1.csv").exists());
        assert!(dir.path().join("report.json").exists());
    }
}
