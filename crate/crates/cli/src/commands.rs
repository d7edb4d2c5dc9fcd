use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use kawasaki::horizon::{contraction_factor, horizon_report, theta_of_t, HorizonReport};
use kawasaki::kinetic::{monitor_bounds, picard_solve, solve_rk4, KineticModel, Method};
use kawasaki::scaling::{run_sweep, write_sweep_outputs};
use kawasaki::simulator::{simulate_ensemble, Dynamics, EnsembleSpec, InitialDensity, Trajectory};
use kawasaki::{Error, Result};

use crate::config::{write_manifest, AnyConfig, HorizonConfig, KineticConfig, SimulateConfig, SweepConfig};

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut out = create(path)?;
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

fn coords(p: &[f64; 3], dim: usize) -> String {
    p[..dim].iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

fn ensemble_spec(cfg: &SimulateConfig) -> Result<EnsembleSpec> {
    let mut dynamics = Dynamics::new(cfg.torus, cfg.kernel, cfg.potential, cfg.epsilon)?;
    if cfg.exclude_mover {
        dynamics = dynamics.excluding_mover();
    }
    Ok(EnsembleSpec {
        dynamics,
        initial: cfg.rho0.initial_density(cfg.torus)?,
        snapshot_times: cfg.snapshot_times.clone(),
        t_end: cfg.t_end,
        max_proposals: cfg.max_proposals,
        n_trajectories: cfg.n_trajectories,
        base_seed: cfg.seed,
        stream_offset: 0,
        record_events: cfg.record_events,
    })
}

fn write_snapshots(trajs: &[Trajectory], dim: usize, path: &Path) -> Result<()> {
    let mut out = create(path)?;
    let header: Vec<String> = (0..dim).map(|k| format!("x{k}")).collect();
    writeln!(out, "traj_id,time,particle_id,{}", header.join(","))?;
    for (id, traj) in trajs.iter().enumerate() {
        for (time, snap) in traj.snapshot_times.iter().zip(&traj.snapshots) {
            for (pid, p) in snap.iter().enumerate() {
                writeln!(out, "{id},{time},{pid},{}", coords(p, dim))?;
            }
        }
    }
    out.flush()?;
    Ok(())
}

fn write_events(trajs: &[Trajectory], dim: usize, path: &Path) -> Result<()> {
    let mut out = create(path)?;
    let from: Vec<String> = (0..dim).map(|k| format!("from_x{k}")).collect();
    let to: Vec<String> = (0..dim).map(|k| format!("to_x{k}")).collect();
    writeln!(out, "traj_id,time,mover,accepted,{},{}", from.join(","), to.join(","))?;
    for (id, traj) in trajs.iter().enumerate() {
        for e in &traj.events {
            writeln!(
                out,
                "{id},{},{},{},{},{}",
                e.time,
                e.mover,
                u8::from(e.accepted),
                coords(&e.from, dim),
                coords(&e.to, dim)
            )?;
        }
    }
    out.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct SimulationSummary {
    n_trajectories: usize,
    mean_initial_count: f64,
    proposals: u64,
    accepted: u64,
    conserved: bool,
}

pub fn simulate(cfg: &SimulateConfig, out: &Path) -> Result<()> {
    let spec = ensemble_spec(cfg)?;
    let trajs = simulate_ensemble(&spec)?;
    let dim = cfg.torus.dim;
    write_snapshots(&trajs, dim, &out.join("snapshots.csv"))?;
    if cfg.record_events {
        write_events(&trajs, dim, &out.join("events.csv"))?;
    }
    let summary = SimulationSummary {
        n_trajectories: trajs.len(),
        mean_initial_count: trajs.iter().map(|t| t.initial_count as f64).sum::<f64>() / trajs.len() as f64,
        proposals: trajs.iter().map(|t| t.proposals).sum(),
        accepted: trajs.iter().map(|t| t.accepted).sum(),
        conserved: trajs.iter().all(Trajectory::conserves_particles),
    };
    write_json(&summary, &out.join("summary.json"))?;
    write_manifest(cfg, out)
}

/// `--out` may name the CSV file itself or a directory that receives `rho.csv`.
pub fn kinetic_paths(out: &Path) -> (PathBuf, PathBuf) {
    if out.extension().is_some_and(|e| e == "csv") {
        let dir = out.parent().map(Path::to_path_buf).unwrap_or_default();
        (out.to_path_buf(), dir)
    } else {
        (out.join("rho.csv"), out.to_path_buf())
    }
}

fn certify(cfg: &KineticConfig, model: &KineticModel) -> Result<()> {
    let u0 = cfg.rho0_field()?.sup();
    let q = contraction_factor(u0, model.alpha(), model.mean_phi(), cfg.solver.t_end)?;
    if q >= 1.0 {
        return Err(Error::Horizon {
            rule: "picard contraction",
            detail: format!("q(T) = {q} >= 1 on [0, {}]", cfg.solver.t_end),
        });
    }
    Ok(())
}

pub fn kinetic(cfg: &KineticConfig, out: &Path) -> Result<()> {
    let (csv, dir) = kinetic_paths(out);
    let model = KineticModel::new(cfg.kernel, cfg.potential, cfg.grid()?)?;
    let rho0 = cfg.rho0_field()?;
    if cfg.certify_window {
        certify(cfg, &model)?;
    }
    let traj = match cfg.solver.method {
        Method::Rk4 => solve_rk4(&model, &rho0, &cfg.solver, cfg.store_every)?,
        Method::Picard => {
            let sol = picard_solve(&model, &rho0, &cfg.solver)?;
            write_json(
                &serde_json::json!({
                    "deltas": sol.deltas,
                    "ratios": sol.ratios,
                    "q_bound": sol.q_bound,
                }),
                &dir.join("picard.json"),
            )?;
            sol.trajectory
        }
    };
    let mut w = create(&csv)?;
    writeln!(w, "time,cell_index,value")?;
    for (t, values) in traj.times.iter().zip(&traj.values) {
        for (i, v) in values.iter().enumerate() {
            writeln!(w, "{t},{i},{v}")?;
        }
    }
    w.flush()?;
    let bounds = monitor_bounds(&traj, model.alpha(), model.is_local())?;
    write_json(&bounds, &dir.join("bounds.json"))?;
    write_manifest(cfg, &dir)?;
    bounds.into_result().map(|_| ())
}

#[derive(Serialize)]
pub struct HorizonOutput {
    #[serde(flatten)]
    pub report: HorizonReport,
    /// Requested time and `theta(t)` there; `theta` is null past `T_*`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub query: Option<serde_json::Value>,
}

pub fn horizon(cfg: &HorizonConfig) -> Result<HorizonOutput> {
    if cfg.theta.is_some() && cfg.t.is_some() {
        return Err(Error::InvalidInput("give either theta or t, not both".into()));
    }
    let mut theta = cfg.theta.unwrap_or(cfg.theta0 - 1.0);
    let mut query = None;
    if let Some(t) = cfg.t {
        let at = theta_of_t(cfg.theta0, cfg.alpha, cfg.c_phi, t)?;
        if let Some(th) = at {
            theta = th;
        }
        query = Some(serde_json::json!({ "t": t, "theta": at }));
    }
    let report = horizon_report(cfg.theta0, theta, cfg.alpha, cfg.c_phi, cfg.mean_phi, cfg.samples)?;
    Ok(HorizonOutput { report, query })
}

pub fn horizon_to(cfg: &HorizonConfig, out: Option<&Path>) -> Result<()> {
    let output = horizon(cfg)?;
    println!("{}", serde_json::to_string_pretty(&output)?);
    if let Some(dir) = out {
        write_json(&output, &dir.join("horizon.json"))?;
        write_manifest(cfg, dir)?;
    }
    Ok(())
}

pub fn sweep(cfg: &SweepConfig, out: &Path) -> Result<()> {
    let spec = cfg.sweep_spec()?;
    let result = run_sweep(&spec)?;
    write_sweep_outputs(&result, out)?;
    write_manifest(cfg, out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostic {
    pub rule: String,
    pub message: String,
    #[serde(skip)]
    pub exit_code: i32,
}

impl From<Error> for Diagnostic {
    fn from(e: Error) -> Self {
        let rule = match &e {
            Error::InvalidGeometry { rule, .. } | Error::Horizon { rule, .. } => rule.to_string(),
            Error::WindowTooLong { .. } => "picard window".into(),
            Error::Budget(_) => "particle budget".into(),
            Error::StepSize { .. } => "step size".into(),
            _ => "schema".into(),
        };
        Diagnostic {
            rule,
            message: e.to_string(),
            exit_code: e.exit_code(),
        }
    }
}

#[derive(Serialize)]
pub struct Validation {
    pub kind: &'static str,
    pub diagnostics: Vec<Diagnostic>,
}

impl Validation {
    /// 0 when clean; 3 when only the budget fails; 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.diagnostics.is_empty() {
            0
        } else if self.diagnostics.iter().all(|d| d.exit_code == 3) {
            3
        } else {
            1
        }
    }
}

fn check(diags: &mut Vec<Diagnostic>, r: Result<()>) {
    if let Err(e) = r {
        diags.push(e.into());
    }
}

fn check_times(times: &[f64], t_end: f64) -> Result<()> {
    if !(t_end.is_finite() && t_end >= 0.0) {
        return Err(Error::InvalidInput(format!("t_end must be non-negative, got {t_end}")));
    }
    if times.iter().any(|t| !(*t >= 0.0 && *t <= t_end)) || times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidInput("snapshot times must be sorted within [0, t_end]".into()));
    }
    Ok(())
}

pub fn validate(config: serde_json::Value) -> Validation {
    let parsed = match AnyConfig::infer(config) {
        Ok(c) => c,
        Err(e) => {
            return Validation {
                kind: "unknown",
                diagnostics: vec![e.into()],
            }
        }
    };
    let mut d = Vec::new();
    let kind = match &parsed {
        AnyConfig::Simulate(cfg) => {
            check(&mut d, Dynamics::new(cfg.torus, cfg.kernel, cfg.potential, cfg.epsilon).map(|_| ()));
            check(&mut d, check_times(&cfg.snapshot_times, cfg.t_end));
            check(
                &mut d,
                cfg.rho0.initial_density(cfg.torus).and_then(|rho| match rho {
                    InitialDensity::Constant(c) if !(c.is_finite() && c >= 0.0) => {
                        Err(Error::InvalidInput(format!("density must be non-negative, got {c}")))
                    }
                    _ => Ok(()),
                }),
            );
            if cfg.n_trajectories == 0 {
                check(&mut d, Err(Error::InvalidInput("n_trajectories must be positive".into())));
            }
            "simulate"
        }
        AnyConfig::Kinetic(cfg) => {
            match cfg.grid().and_then(|g| KineticModel::new(cfg.kernel, cfg.potential, g)) {
                Ok(model) => {
                    check(&mut d, cfg.rho0_field().map(|_| ()));
                    check(&mut d, cfg.solver.validate(model.alpha()));
                    if cfg.solver.method == Method::Picard || cfg.certify_window {
                        check(&mut d, certify(cfg, &model));
                    }
                }
                Err(e) => d.push(e.into()),
            }
            "kinetic"
        }
        AnyConfig::Horizon(cfg) => {
            check(&mut d, horizon(cfg).map(|_| ()));
            "horizon"
        }
        AnyConfig::Sweep(cfg) => {
            match cfg.sweep_spec() {
                Ok(spec) => {
                    // Budget last so structural problems are reported alongside it.
                    let structural = kawasaki::scaling::SweepSpec {
                        particle_budget: f64::INFINITY,
                        ..spec.clone()
                    };
                    check(&mut d, structural.validate());
                    check(&mut d, spec.check_budget());
                }
                Err(e) => d.push(e.into()),
            }
            "scale-sweep"
        }
    };
    Validation { kind, diagnostics: d }
}
