use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use smmc::bnn::train_bnn;
use smmc::dataset::{
    generate_dataset, read_dataset, sample_parameters, smc_estimate, write_dataset, Dataset, Role, SmcEstimate,
};
use smmc::gp::train_gp;
use smmc::guarantees::{
    bound_table, combined_bound, conformal_bound, icp_bound, pac_bayes_report, write_bound_table, BoundReport,
};
use smmc::metrics::{evaluate, EvaluationReport};
use smmc::pctmc::{ssa_simulate, PctmcModel, Trajectory};
use smmc::rng::{child_rng, derive_seed};
use smmc::stl::CompiledFormula;
use smmc::{Error, PosteriorBundle, Result};

use crate::config::{Backend, ModelSource, RunConfig};
use crate::manifest::{sha256_hex, Manifest};

pub const MODEL: &str = "model.json";
pub const TRAIN: &str = "train.csv";
pub const CALIBRATION: &str = "calibration.csv";
pub const TEST: &str = "test.csv";
pub const POSTERIOR: &str = "posterior.json";
pub const TRAIN_DIAGNOSTICS: &str = "train_diagnostics.json";
pub const BOUNDS: &str = "bounds.json";
pub const BOUNDS_TABLE: &str = "bounds.csv";
pub const EVALUATION: &str = "evaluation.json";
pub const EVALUATION_TABLE: &str = "evaluation.csv";
pub const TRAJECTORIES: &str = "trajectories.json";
pub const TRAJECTORIES_TABLE: &str = "trajectories.csv";
pub const MONITOR: &str = "monitor.json";

fn sidecar(name: &str) -> String {
    name.replace(".csv", ".json")
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::InvalidArgument(format!("cannot read {}: {e}", path.display())))?;
    Ok(serde_json::from_str(&text)?)
}

fn require(dir: &Path, names: &[&str]) -> Result<()> {
    for n in names {
        let p = dir.join(n);
        if !p.exists() {
            return Err(Error::InvalidArgument(format!("missing input {}", p.display())));
        }
    }
    Ok(())
}

fn record(cfg: &RunConfig, dir: &Path, command: &str, inputs: &[&str], outputs: &[&str]) -> Result<()> {
    Manifest::record(dir, &cfg.to_json()?, command, inputs, outputs)
}

struct Generated {
    dir: PathBuf,
    model_json: String,
    sets: [Dataset; 3],
}

/// Samples parameters, simulates and monitors the train, calibration and
/// test sets of every configured model and writes them with the model.
pub fn cmd_generate(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    let formula = cfg.parsed_formula()?;
    let horizon = cfg.horizon()?;
    let s = &cfg.sizes;
    let mut all = Vec::new();
    for (i, (sub, model)) in cfg.models()?.into_iter().enumerate() {
        let base = if sub.is_empty() { cfg.seed } else { derive_seed(cfg.seed, &[1000, i as u64]) };
        let model_json = serde_json::to_string_pretty(&model)? + "\n";
        let hash = sha256_hex(model_json.as_bytes());
        let make = |role: Role, n: usize, m: u32, k: u64| -> Result<Dataset> {
            let thetas = sample_parameters(&model.param_space, n, cfg.sampling, &mut child_rng(base, &[k, 0]))?;
            let mut ds = generate_dataset(&model, &formula, &thetas, m, horizon, role, derive_seed(base, &[k, 1]))?;
            ds.meta.model_hash = Some(hash.clone());
            Ok(ds)
        };
        let sets = [
            make(Role::Train, s.n_train, s.m_train, 0)?,
            make(Role::Calibration, s.n_cal, s.m_train, 1)?,
            make(Role::Test, s.n_test, s.m_test, 2)?,
        ];
        all.push(Generated { dir: cfg.out_dir.join(sub), model_json, sets });
    }
    let mut dirs = Vec::new();
    for g in all {
        std::fs::create_dir_all(&g.dir)?;
        std::fs::write(g.dir.join(MODEL), &g.model_json)?;
        for (ds, name) in g.sets.iter().zip([TRAIN, CALIBRATION, TEST]) {
            write_dataset(ds, &g.dir.join(name))?;
        }
        let outs = [MODEL, TRAIN, &sidecar(TRAIN), CALIBRATION, &sidecar(CALIBRATION), TEST, &sidecar(TEST)];
        record(cfg, &g.dir, "generate", &[], &outs)?;
        dirs.push(g.dir);
    }
    Ok(dirs)
}

/// Writes the random models of a `random` model source.
pub fn cmd_random_model(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let ModelSource::Random { reactions, seed, count } = cfg.model else {
        return Err(Error::InvalidArgument("random-model needs a `random` model source in the config".into()));
    };
    if reactions == 0 || count == 0 {
        return Err(Error::InvalidArgument("random models need at least one reaction and count >= 1".into()));
    }
    let models = smmc::pctmc::random_pctmcs(reactions, count, seed)?;
    let dir = cfg.out_dir.join("models");
    std::fs::create_dir_all(&dir)?;
    let mut names = Vec::new();
    for (i, m) in models.iter().enumerate() {
        let name = format!("model_{i}.json");
        std::fs::write(dir.join(&name), serde_json::to_string_pretty(m)? + "\n")?;
        names.push(name);
    }
    let refs: Vec<&str> = names.iter().map(String::as_str).collect();
    record(cfg, &dir, "random-model", &[], &refs)?;
    Ok(names.iter().map(|n| dir.join(n)).collect())
}

/// Simulated runs at one parameter vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryFile {
    pub species: Vec<String>,
    pub theta: Vec<f64>,
    pub horizon: f64,
    pub runs: Vec<Trajectory>,
}

fn single_model(cfg: &RunConfig) -> Result<PctmcModel> {
    let mut models = cfg.models()?;
    if models.len() != 1 {
        return Err(Error::InvalidArgument("this command needs a single model; point --config at one model file".into()));
    }
    Ok(models.remove(0).1)
}

/// Simulates `runs` trajectories at `theta` up to the configured horizon.
pub fn cmd_simulate(cfg: &RunConfig, theta: &[f64], runs: usize) -> Result<TrajectoryFile> {
    let model = single_model(cfg)?;
    let horizon = cfg.horizon()?;
    if runs == 0 {
        return Err(Error::InvalidArgument("need at least one run".into()));
    }
    if !model.param_space.contains(theta) {
        return Err(Error::InvalidArgument(format!("parameter {theta:?} lies outside the parameter space")));
    }
    let trajs = (0..runs)
        .map(|r| ssa_simulate(&model, theta, horizon, &mut child_rng(cfg.seed, &[5, r as u64])))
        .collect::<Result<Vec<_>>>()?;
    let file = TrajectoryFile { species: model.species.clone(), theta: theta.to_vec(), horizon, runs: trajs };
    let dir = &cfg.out_dir;
    std::fs::create_dir_all(dir)?;
    write_json(&dir.join(TRAJECTORIES), &file)?;
    let mut w = csv::Writer::from_path(dir.join(TRAJECTORIES_TABLE)).map_err(smmc::Error::from)?;
    let mut header = vec!["run".to_string(), "time".to_string()];
    header.extend(file.species.iter().cloned());
    w.write_record(&header).map_err(smmc::Error::from)?;
    for (r, tr) in file.runs.iter().enumerate() {
        for (k, t) in tr.times.iter().enumerate() {
            let mut row = vec![r.to_string(), t.to_string()];
            row.extend(tr.state(k).iter().map(u64::to_string));
            w.write_record(&row).map_err(smmc::Error::from)?;
        }
    }
    w.flush()?;
    record(cfg, dir, "simulate", &[], &[TRAJECTORIES, TRAJECTORIES_TABLE])?;
    Ok(file)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonitorReport {
    pub formula: String,
    pub satisfied: Vec<bool>,
    pub estimate: SmcEstimate,
}

/// Checks the configured formula on every run of a trajectory file.
pub fn cmd_monitor(cfg: &RunConfig, trajectories: &Path) -> Result<MonitorReport> {
    let formula = cfg.parsed_formula()?;
    let file: TrajectoryFile = read_json(trajectories)?;
    let compiled = CompiledFormula::new(&formula, &file.species)?;
    let satisfied = file.runs.iter().map(|t| compiled.check(t)).collect::<Result<Vec<_>>>()?;
    if satisfied.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let k = satisfied.iter().filter(|&&b| b).count() as u32;
    let estimate = smc_estimate(k, satisfied.len() as u32, cfg.metrics.z);
    let report = MonitorReport { formula: formula.to_string(), satisfied, estimate };
    std::fs::create_dir_all(&cfg.out_dir)?;
    write_json(&cfg.out_dir.join(MONITOR), &report)?;
    record(cfg, &cfg.out_dir, "monitor", &[], &[MONITOR])?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainDiagnostics {
    pub backend: Backend,
    pub wall_clock_seconds: f64,
    pub final_elbo: f64,
    pub steps: u64,
    pub elbo_trace: Vec<f64>,
    pub inducing_points: Option<usize>,
    pub prior_pretrained: Option<bool>,
    pub pretrain_loglik: Option<f64>,
}

/// Fits the configured back end on `train.csv`.
pub fn cmd_train(cfg: &RunConfig) -> Result<(PosteriorBundle, TrainDiagnostics)> {
    cfg.validate()?;
    let dir = &cfg.out_dir;
    require(dir, &[TRAIN])?;
    let train = read_dataset(&dir.join(TRAIN))?;
    let start = Instant::now();
    let (bundle, mut diag) = match cfg.backend {
        Backend::Gp => {
            let p = train_gp(&train, &smmc::gp::GpConfig { seed: cfg.seed, ..cfg.gp.clone() })?;
            let d = &p.diagnostics;
            let diag = TrainDiagnostics {
                backend: Backend::Gp,
                wall_clock_seconds: 0.0,
                final_elbo: d.final_elbo,
                steps: d.steps,
                elbo_trace: d.elbo_trace.clone(),
                inducing_points: Some(d.m),
                prior_pretrained: None,
                pretrain_loglik: None,
            };
            (PosteriorBundle::Gp(p), diag)
        }
        Backend::Bnn => {
            let p = train_bnn(&train, &smmc::bnn::BnnConfig { seed: cfg.seed, ..cfg.bnn.clone() })?;
            let d = &p.diagnostics;
            let diag = TrainDiagnostics {
                backend: Backend::Bnn,
                wall_clock_seconds: 0.0,
                final_elbo: d.final_elbo,
                steps: d.steps,
                elbo_trace: d.elbo_trace.clone(),
                inducing_points: None,
                prior_pretrained: Some(p.prior.pretrained),
                pretrain_loglik: d.pretrain_loglik,
            };
            (PosteriorBundle::Bnn(p), diag)
        }
    };
    diag.wall_clock_seconds = start.elapsed().as_secs_f64();
    if !diag.final_elbo.is_finite() {
        return Err(Error::NonFinite(format!("training ended with ELBO {} after {} steps", diag.final_elbo, diag.steps)));
    }
    bundle.save(&dir.join(POSTERIOR))?;
    write_json(&dir.join(TRAIN_DIAGNOSTICS), &diag)?;
    record(cfg, dir, "train", &[TRAIN], &[POSTERIOR])?;
    Ok((bundle, diag))
}

/// ICP, normalized ICP, both with the Chernoff correction, and the
/// PAC-Bayes bound, from `calibration.csv`. The per-point table uses the
/// normalized Chernoff-corrected bound on the test points (or the
/// calibration points when no test set exists).
pub fn cmd_calibrate(cfg: &RunConfig) -> Result<BoundReport> {
    cfg.validate()?;
    let dir = &cfg.out_dir;
    require(dir, &[POSTERIOR, CALIBRATION, TRAIN])?;
    let bundle = PosteriorBundle::load(&dir.join(POSTERIOR))?;
    let cal = read_dataset(&dir.join(CALIBRATION))?;
    let train = read_dataset(&dir.join(TRAIN))?;
    let g = &cfg.guarantees;
    let m = cal.trials()?;
    let icp = icp_bound(&bundle, &cal, g.epsilon)?;
    let nicp = conformal_bound(&bundle, &cal, g.epsilon, g.normalizer)?;
    let icp_c = combined_bound(&icp, m, g.epsilon2)?;
    let nicp_c = combined_bound(&nicp, m, g.epsilon2)?;
    let pac = pac_bayes_report(&bundle, &train, g.pac_epsilon, g.pac_draws, derive_seed(cfg.seed, &[7]))?;
    let table_src = if dir.join(TEST).exists() { read_dataset(&dir.join(TEST))? } else { cal.clone() };
    let rows = bound_table(&nicp_c, &bundle, &table_src.thetas())?;
    let report = BoundReport { n_calibration: cal.len(), trials: m, bounds: vec![icp, nicp, icp_c, nicp_c], pac_bayes: Some(pac) };
    report.save(&dir.join(BOUNDS))?;
    write_bound_table(&dir.join(BOUNDS_TABLE), &rows)?;
    record(cfg, dir, "calibrate", &[POSTERIOR, CALIBRATION, TRAIN], &[BOUNDS, BOUNDS_TABLE])?;
    Ok(report)
}

/// RMSE, accuracy and uncertainty width on `test.csv`.
pub fn cmd_evaluate(cfg: &RunConfig) -> Result<EvaluationReport> {
    cfg.validate()?;
    let dir = &cfg.out_dir;
    require(dir, &[POSTERIOR, TEST])?;
    let bundle = PosteriorBundle::load(&dir.join(POSTERIOR))?;
    let test = read_dataset(&dir.join(TEST))?;
    if test.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let report = evaluate(&bundle, &test, cfg.metrics.epsilon, cfg.metrics.z)?;
    report.save(&dir.join(EVALUATION))?;
    report.write_csv(&dir.join(EVALUATION_TABLE))?;
    record(cfg, dir, "evaluate", &[POSTERIOR, TEST], &[EVALUATION, EVALUATION_TABLE])?;
    Ok(report)
}
