mod commands;
mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use kawasaki::{Error, Result};

use crate::config::{load, read_json, HorizonConfig, KineticConfig, SimulateConfig, SweepConfig};

#[derive(Parser)]
#[command(name = "kawasaki", version, about = "Continuum Kawasaki dynamics: simulation, kinetic solver and certificates")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Run an ensemble of particle trajectories.
    Simulate(Common),
    /// Solve the mean-field kinetic equation.
    Kinetic(Common),
    /// Existence horizon, operator bound and contraction factor.
    Horizon(HorizonArgs),
    /// Compare scaled particle systems with the kinetic solution.
    ScaleSweep(Common),
    /// Check a config without running it.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Args)]
struct HorizonArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, allow_hyphen_values = true)]
    theta0: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    alpha: Option<f64>,
    #[arg(long)]
    cphi: Option<f64>,
    #[arg(long)]
    mean_phi: Option<f64>,
    #[arg(long, allow_hyphen_values = true, conflicts_with = "t")]
    theta: Option<f64>,
    #[arg(long)]
    t: Option<f64>,
}

impl HorizonArgs {
    fn resolve(&self) -> Result<HorizonConfig> {
        let mut cfg = match &self.config {
            Some(path) => load::<HorizonConfig>(path)?,
            None => HorizonConfig {
                theta0: self.theta0.ok_or_else(|| missing("theta0"))?,
                theta: None,
                t: None,
                alpha: self.alpha.ok_or_else(|| missing("alpha"))?,
                c_phi: self.cphi.ok_or_else(|| missing("cphi"))?,
                mean_phi: None,
                samples: 11,
                code_version: None,
            },
        };
        if let Some(v) = self.theta0 {
            cfg.theta0 = v;
        }
        if let Some(v) = self.alpha {
            cfg.alpha = v;
        }
        if let Some(v) = self.cphi {
            cfg.c_phi = v;
        }
        if self.mean_phi.is_some() {
            cfg.mean_phi = self.mean_phi;
        }
        if self.theta.is_some() {
            cfg.theta = self.theta;
            cfg.t = None;
        }
        if self.t.is_some() {
            cfg.t = self.t;
            cfg.theta = None;
        }
        Ok(cfg)
    }
}

fn missing(flag: &str) -> Error {
    Error::InvalidInput(format!("--{flag} is required without --config"))
}

fn set_threads(threads: Option<usize>) -> Result<()> {
    if let Some(n) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::InvalidInput(format!("thread pool: {e}")))?;
    }
    Ok(())
}

fn with_seed<T>(path: &Path, seed: Option<u64>, set: impl FnOnce(&mut T, u64)) -> Result<T>
where
    T: serde::de::DeserializeOwned,
{
    let mut cfg: T = load(path)?;
    if let Some(s) = seed {
        set(&mut cfg, s);
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Simulate(c) => {
            set_threads(c.threads)?;
            let cfg: SimulateConfig = with_seed(&c.config, c.seed, |cfg: &mut SimulateConfig, s| cfg.seed = s)?;
            commands::simulate(&cfg, &c.out)?;
        }
        Command::Kinetic(c) => {
            set_threads(c.threads)?;
            let cfg: KineticConfig = load(&c.config)?;
            commands::kinetic(&cfg, &c.out)?;
        }
        Command::ScaleSweep(c) => {
            set_threads(c.threads)?;
            let cfg: SweepConfig = with_seed(&c.config, c.seed, |cfg: &mut SweepConfig, s| cfg.seed = s)?;
            commands::sweep(&cfg, &c.out)?;
        }
        Command::Horizon(h) => {
            commands::horizon_to(&h.resolve()?, h.out.as_deref())?;
        }
        Command::Validate { config } => {
            let report = commands::validate(read_json(&config)?);
            println!("{}", serde_json::to_string_pretty(&report)?);
            return Ok(report.exit_code());
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
