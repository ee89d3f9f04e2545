//! Command-line pipeline: generate data, train a surrogate, calibrate
//! bounds and evaluate, all driven by one JSON [`RunConfig`].

pub mod commands;
pub mod config;
pub mod manifest;

use std::path::PathBuf;

use clap::{Parser, Subcommand};
use smmc::{Error, Result};

pub use config::{Backend, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "smmc", version, about = "Smoothed model checking with error guarantees")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// RunConfig JSON file; defaults apply when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// `gp` or `bnn`.
    #[arg(long, global = true)]
    pub backend: Option<String>,
    #[arg(long, global = true, conflicts_with = "formula_file")]
    pub formula: Option<String>,
    #[arg(long, global = true)]
    pub formula_file: Option<PathBuf>,
    /// Run directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write the model and the train, calibration and test sets.
    Generate,
    /// Simulate trajectories at one parameter vector.
    Simulate {
        /// Comma-separated parameter values.
        #[arg(long, value_delimiter = ',', required = true, allow_negative_numbers = true)]
        theta: Vec<f64>,
        #[arg(long, default_value_t = 1)]
        runs: usize,
    },
    /// Check the formula on simulated trajectories.
    Monitor {
        /// Trajectory file written by `simulate` (default: in the run directory).
        #[arg(long)]
        trajectories: Option<PathBuf>,
    },
    /// Train the configured back end on the training set.
    Train,
    /// Compute conformal, Chernoff and PAC-Bayes bounds.
    Calibrate,
    /// Score the trained surrogate on the test set.
    Evaluate,
    /// Write random models from a `random` model source.
    RandomModel,
}

/// Config file plus command-line overrides.
pub fn resolve_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(b) = &cli.backend {
        cfg.backend = b.parse()?;
    }
    if let Some(f) = &cli.formula {
        cfg.formula = f.clone();
    }
    if let Some(p) = &cli.formula_file {
        cfg.formula = std::fs::read_to_string(p)?.trim().to_string();
    }
    if let Some(o) = &cli.out {
        cfg.out_dir = o.clone();
    }
    Ok(cfg)
}

/// Runs one subcommand and returns a short human-readable summary.
pub fn run(cli: &Cli) -> Result<String> {
    let cfg = resolve_config(cli)?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Error::InvalidArgument("--threads must be at least 1".into()));
        }
        pool = pool.num_threads(n);
    }
    let pool = pool.build().map_err(|e| Error::InvalidArgument(e.to_string()))?;
    pool.install(|| dispatch(&cli.command, &cfg))
}

fn dispatch(command: &Command, cfg: &RunConfig) -> Result<String> {
    use commands::*;
    match command {
        Command::Generate => {
            let dirs = cmd_generate(cfg)?;
            Ok(dirs.iter().map(|d| format!("wrote datasets to {}", d.display())).collect::<Vec<_>>().join("\n"))
        }
        Command::Simulate { theta, runs } => {
            let f = cmd_simulate(cfg, theta, *runs)?;
            Ok(format!("simulated {} runs to {}", f.runs.len(), cfg.out_dir.join(TRAJECTORIES).display()))
        }
        Command::Monitor { trajectories } => {
            let path = trajectories.clone().unwrap_or_else(|| cfg.out_dir.join(TRAJECTORIES));
            let r = cmd_monitor(cfg, &path)?;
            Ok(format!(
                "{} of {} runs satisfy the formula (estimate {} ± {})",
                r.satisfied.iter().filter(|&&b| b).count(),
                r.satisfied.len(),
                r.estimate.mean,
                r.estimate.ci_halfwidth
            ))
        }
        Command::Train => {
            let (_, d) = cmd_train(cfg)?;
            Ok(format!("trained {:?} in {:.1} s, final ELBO {}", d.backend, d.wall_clock_seconds, d.final_elbo))
        }
        Command::Calibrate => {
            let r = cmd_calibrate(cfg)?;
            let mut lines: Vec<String> = r
                .bounds
                .iter()
                .map(|b| format!("{:?}: tau {} (rank {}, epsilon {})", b.kind, b.tau, b.rank, b.epsilon_total))
                .collect();
            if let Some(p) = &r.pac_bayes {
                lines.push(format!("PAC-Bayes: {} (empirical {}, KL {})", p.bound, p.empirical.mean, p.kl));
            }
            Ok(lines.join("\n"))
        }
        Command::Evaluate => {
            let r = cmd_evaluate(cfg)?;
            Ok(format!(
                "rmse {} accuracy {} width {} (SMC {})",
                r.rmse, r.accuracy, r.uncertainty_width, r.test_uncertainty_width
            ))
        }
        Command::RandomModel => {
            let paths = cmd_random_model(cfg)?;
            Ok(format!("wrote {} models to {}", paths.len(), cfg.out_dir.join("models").display()))
        }
    }
}
