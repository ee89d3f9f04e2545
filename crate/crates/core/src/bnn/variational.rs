use faer::Mat;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::arch::{loglik_grad, BnnArchitecture};
use crate::dataset::{Observations, Scaling};
use crate::error::{Error, Result};

/// Independent Gaussian prior over every weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BnnPrior {
    pub center: Vec<f64>,
    pub std: Vec<f64>,
    /// Whether `center` came from fitting a network to the training data.
    pub pretrained: bool,
}

impl BnnPrior {
    pub fn standard_normal(n: usize) -> Self {
        Self { center: vec![0.0; n], std: vec![1.0; n], pretrained: false }
    }
}

/// Per-layer standard deviation `1/m`, with `m` the larger of the layer's
/// fan-in and fan-out (the hidden width for every layer of a uniform net).
pub fn layer_std(arch: &BnnArchitecture) -> Vec<f64> {
    let mut out = vec![0.0; arch.n_params()];
    for l in arch.layers() {
        let s = 1.0 / l.fan_in.max(l.fan_out) as f64;
        out[l.weights..l.end()].iter_mut().for_each(|x| *x = s);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BnnDiagnostics {
    pub final_elbo: f64,
    /// Minibatch ELBO estimate per optimizer step.
    pub elbo_trace: Vec<f64>,
    pub steps: u64,
    /// Final mean binomial log-likelihood of the prior-fitting run, if any.
    pub pretrain_loglik: Option<f64>,
}

/// Mean-field Gaussian `q(w)`, its prior and the metadata to use it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BnnPosterior {
    pub arch: BnnArchitecture,
    pub mu: Vec<f64>,
    pub log_std: Vec<f64>,
    pub prior: BnnPrior,
    pub scaling: Scaling,
    pub diagnostics: BnnDiagnostics,
    /// Number of weight draws used by prediction.
    pub n_samples: usize,
    pub predict_seed: u64,
    #[serde(default)]
    pub training_trials: Option<u32>,
}

impl BnnPosterior {
    pub fn validate(&self) -> Result<()> {
        self.arch.validate()?;
        let n = self.arch.n_params();
        for len in [self.mu.len(), self.log_std.len(), self.prior.center.len(), self.prior.std.len()] {
            if len != n {
                return Err(Error::DimensionMismatch { expected: n, actual: len });
            }
        }
        if self.prior.std.iter().any(|&s| !(s > 0.0)) {
            return Err(Error::InvalidArgument("prior standard deviations must be positive".into()));
        }
        Ok(())
    }

    /// `μ + σ ⊙ ξ`.
    pub fn weights(&self, xi: &[f64]) -> Vec<f64> {
        self.mu.iter().zip(&self.log_std).zip(xi).map(|((m, r), e)| m + r.exp() * e).collect()
    }

    pub fn draw_noise<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        (0..self.mu.len()).map(|_| rng.sample(StandardNormal)).collect()
    }
}

/// `Σ_w KL[N(μ, σ²) ‖ N(μ_p, σ_p²)]`.
pub fn kl_weights(post: &BnnPosterior) -> f64 {
    kl_terms(&post.mu, &post.log_std, &post.prior).0
}

/// KL together with its gradients in `μ` and `log σ`.
pub(crate) fn kl_terms(mu: &[f64], log_std: &[f64], prior: &BnnPrior) -> (f64, Vec<f64>, Vec<f64>) {
    let n = mu.len();
    let mut kl = 0.0;
    let mut g_mu = vec![0.0; n];
    let mut g_rho = vec![0.0; n];
    for i in 0..n {
        let sp2 = prior.std[i] * prior.std[i];
        let s2 = (2.0 * log_std[i]).exp();
        let dm = mu[i] - prior.center[i];
        kl += prior.std[i].ln() - log_std[i] + (s2 + dm * dm) / (2.0 * sp2) - 0.5;
        g_mu[i] = dm / sp2;
        g_rho[i] = s2 / sp2 - 1.0;
    }
    (kl, g_mu, g_rho)
}

/// ELBO estimate for fixed reparameterization noise `xi` (one vector per
/// Monte Carlo sample) and its gradients in `μ` and `log σ` (ascent).
pub fn elbo_bnn_fixed(
    post: &BnnPosterior,
    obs: &Observations,
    batch: &[usize],
    n_total: usize,
    xi: &[Vec<f64>],
) -> Result<(f64, Vec<f64>, Vec<f64>)> {
    if batch.is_empty() || xi.is_empty() {
        return Err(Error::InvalidArgument("need a nonempty batch and at least one noise sample".into()));
    }
    let d = post.arch.input_dim;
    let x = Mat::from_fn(batch.len(), d, |i, k| obs.x[batch[i]][k]);
    let k: Vec<u32> = batch.iter().map(|&i| obs.successes[i]).collect();
    let n: Vec<u32> = batch.iter().map(|&i| obs.trials[i]).collect();
    let scale = n_total as f64 / batch.len() as f64 / xi.len() as f64;
    let np = post.mu.len();
    let mut lik = 0.0;
    let mut g_mu = vec![0.0; np];
    let mut g_rho = vec![0.0; np];
    let mut gw = vec![0.0; np];
    for e in xi {
        let w = post.weights(e);
        gw.iter_mut().for_each(|g| *g = 0.0);
        lik += scale * loglik_grad(&post.arch, &w, x.as_ref(), &k, &n, scale, &mut gw);
        for i in 0..np {
            g_mu[i] += gw[i];
            g_rho[i] += gw[i] * e[i] * post.log_std[i].exp();
        }
    }
    let (kl, k_mu, k_rho) = kl_terms(&post.mu, &post.log_std, &post.prior);
    for i in 0..np {
        g_mu[i] -= k_mu[i];
        g_rho[i] -= k_rho[i];
    }
    let value = lik - kl;
    if !value.is_finite() {
        return Err(Error::NonFinite("BNN ELBO".into()));
    }
    Ok((value, g_mu, g_rho))
}

/// `(N/|B|)(1/n_mc) Σ_s Σ_B log p(y_i | f_{w_s}(x_i)) − KL[q ‖ p]` with
/// `w_s` drawn from `rng`.
pub fn elbo_bnn<R: Rng + ?Sized>(
    post: &BnnPosterior,
    obs: &Observations,
    batch: &[usize],
    n_total: usize,
    n_mc: usize,
    rng: &mut R,
) -> Result<f64> {
    if n_mc == 0 {
        return Err(Error::InvalidArgument("n_mc must be at least 1".into()));
    }
    let xi: Vec<Vec<f64>> = (0..n_mc).map(|_| post.draw_noise(rng)).collect();
    Ok(elbo_bnn_fixed(post, obs, batch, n_total, &xi)?.0)
}
