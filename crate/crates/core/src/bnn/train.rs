use faer::Mat;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::arch::{loglik_grad, BnnArchitecture};
use super::variational::{elbo_bnn_fixed, layer_std, BnnDiagnostics, BnnPosterior, BnnPrior};
use crate::dataset::{Dataset, Observations, Role};
use crate::error::{Error, Result};
use crate::optim::Adam;
use crate::rng::child_rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BnnConfig {
    pub hidden_widths: Vec<usize>,
    pub leaky_slope: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub n_mc: usize,
    pub seed: u64,
    /// Center the prior on a maximum-likelihood network; otherwise use N(0, 1).
    pub pretrain: bool,
    pub pretrain_epochs: usize,
    /// Predictive draws `C`.
    pub n_samples: usize,
}

impl Default for BnnConfig {
    fn default() -> Self {
        Self {
            hidden_widths: vec![64, 64, 64],
            leaky_slope: 0.01,
            epochs: 2000,
            batch_size: 100,
            learning_rate: 0.001,
            n_mc: 1,
            seed: 0,
            pretrain: true,
            pretrain_epochs: 2000,
            n_samples: 1000,
        }
    }
}

impl BnnConfig {
    pub fn architecture(&self, input_dim: usize) -> BnnArchitecture {
        BnnArchitecture { input_dim, hidden_widths: self.hidden_widths.clone(), leaky_slope: self.leaky_slope }
    }

    fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.n_mc == 0 || self.n_samples < 2 {
            return Err(Error::InvalidArgument("batch_size and n_mc must be positive and n_samples at least 2".into()));
        }
        if !(self.learning_rate >= 0.0) {
            return Err(Error::InvalidArgument("learning rate must be nonnegative".into()));
        }
        Ok(())
    }
}

fn check_train(ds: &Dataset) -> Result<()> {
    if ds.role != Role::Train {
        return Err(Error::InvalidArgument(format!("expected a train dataset, got {}", ds.role)));
    }
    if ds.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok(())
}

/// Uniform initialization with bound `sqrt(6 / ((1 + a²) fan_in))`, zero biases.
pub fn kaiming_uniform<R: Rng + ?Sized>(arch: &BnnArchitecture, rng: &mut R) -> Vec<f64> {
    let mut w = vec![0.0; arch.n_params()];
    let a2 = arch.leaky_slope * arch.leaky_slope;
    for l in arch.layers() {
        let bound = (6.0 / ((1.0 + a2) * l.fan_in as f64)).sqrt();
        for x in &mut w[l.weights..l.biases] {
            *x = rng.random_range(-bound..bound);
        }
    }
    w
}

/// Fits a deterministic network by maximum likelihood and returns it as
/// the prior center with per-layer standard deviation `1/m`.
pub fn pretrain_prior(ds: &Dataset, arch: &BnnArchitecture, cfg: &BnnConfig) -> Result<(BnnPrior, f64)> {
    check_train(ds)?;
    cfg.validate()?;
    arch.validate()?;
    let obs = Observations::from_dataset(ds);
    let n = obs.len();
    let mut w = kaiming_uniform(arch, &mut child_rng(cfg.seed, &[10]));
    let mut adam = Adam::new(w.len(), cfg.learning_rate);
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = child_rng(cfg.seed, &[11]);
    let mut grad = vec![0.0; w.len()];
    for _ in 0..cfg.pretrain_epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(cfg.batch_size) {
            let (x, k, t) = gather(&obs, batch);
            grad.iter_mut().for_each(|g| *g = 0.0);
            let ll = loglik_grad(arch, &w, x.as_ref(), &k, &t, -1.0 / batch.len() as f64, &mut grad);
            if !ll.is_finite() {
                return Err(Error::NonFinite("prior fitting log-likelihood".into()));
            }
            adam.step(&mut w, &grad);
        }
    }
    let all: Vec<usize> = (0..n).collect();
    let (x, k, t) = gather(&obs, &all);
    let mut sink = vec![0.0; w.len()];
    let ll = loglik_grad(arch, &w, x.as_ref(), &k, &t, 0.0, &mut sink) / n as f64;
    if !ll.is_finite() {
        return Err(Error::NonFinite("prior fitting log-likelihood".into()));
    }
    Ok((BnnPrior { center: w, std: layer_std(arch), pretrained: true }, ll))
}

fn gather(obs: &Observations, batch: &[usize]) -> (Mat<f64>, Vec<u32>, Vec<u32>) {
    let d = obs.x.first().map_or(0, Vec::len);
    let x = Mat::from_fn(batch.len(), d, |i, k| obs.x[batch[i]][k]);
    (x, batch.iter().map(|&i| obs.successes[i]).collect(), batch.iter().map(|&i| obs.trials[i]).collect())
}

/// Mean-field variational training by Adam on reparameterized ELBO estimates.
///
/// `q` starts with means at the prior center (or a random initialization
/// for the N(0, 1) prior) and per-layer standard deviation `1/m`.
pub fn train_bnn(ds: &Dataset, cfg: &BnnConfig) -> Result<BnnPosterior> {
    check_train(ds)?;
    cfg.validate()?;
    let arch = cfg.architecture(ds.dim());
    arch.validate()?;
    let (prior, pretrain_loglik, mu) = if cfg.pretrain {
        let (p, ll) = pretrain_prior(ds, &arch, cfg)?;
        let mu = p.center.clone();
        (p, Some(ll), mu)
    } else {
        let mu = kaiming_uniform(&arch, &mut child_rng(cfg.seed, &[10]));
        (BnnPrior::standard_normal(arch.n_params()), None, mu)
    };
    let log_std = layer_std(&arch).iter().map(|s| s.ln()).collect();
    let mut post = BnnPosterior {
        arch,
        mu,
        log_std,
        prior,
        scaling: ds.scaling.clone(),
        diagnostics: BnnDiagnostics { final_elbo: f64::NAN, elbo_trace: vec![], steps: 0, pretrain_loglik },
        n_samples: cfg.n_samples,
        predict_seed: crate::rng::derive_seed(cfg.seed, &[30]),
        training_trials: ds.trials().ok(),
    };

    let obs = Observations::from_dataset(ds);
    let n = obs.len();
    let np = post.mu.len();
    let mut params: Vec<f64> = post.mu.iter().chain(&post.log_std).copied().collect();
    let mut adam = Adam::new(2 * np, cfg.learning_rate);
    let mut order: Vec<usize> = (0..n).collect();
    let mut batch_rng = child_rng(cfg.seed, &[20]);
    let mut noise_rng = child_rng(cfg.seed, &[21]);
    let mut trace = Vec::with_capacity(cfg.epochs * n.div_ceil(cfg.batch_size));
    let mut grad = vec![0.0; 2 * np];
    for _ in 0..cfg.epochs {
        order.shuffle(&mut batch_rng);
        for batch in order.chunks(cfg.batch_size) {
            let xi: Vec<Vec<f64>> = (0..cfg.n_mc).map(|_| post.draw_noise(&mut noise_rng)).collect();
            let (value, g_mu, g_rho) = elbo_bnn_fixed(&post, &obs, batch, n, &xi)?;
            for i in 0..np {
                grad[i] = -g_mu[i];
                grad[np + i] = -g_rho[i];
            }
            adam.step(&mut params, &grad);
            post.mu.copy_from_slice(&params[..np]);
            post.log_std.copy_from_slice(&params[np..]);
            trace.push(value);
        }
    }
    post.diagnostics.final_elbo = trace.last().copied().unwrap_or(f64::NAN);
    post.diagnostics.elbo_trace = trace;
    post.diagnostics.steps = adam.steps();
    Ok(post)
}
