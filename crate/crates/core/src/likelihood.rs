//! Binomial observation model behind both surrogates.
//!
//! An observation is `k` successes out of `n` runs with success probability
//! `Φ(g)` for a latent value `g`. Probabilities are clipped to
//! `[1e-12, 1 - 1e-12]` before taking logs; the derivative is zero wherever
//! the clip is active.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;
use statrs::function::factorial::ln_binomial;

use crate::quadrature::GaussHermite;

pub const PROB_FLOOR: f64 = 1e-12;

const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Monotone map from the latent line to `(0, 1)`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Link {
    #[default]
    Probit,
    Logit,
}

/// Standard normal CDF.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

pub fn norm_pdf(x: f64) -> f64 {
    FRAC_1_SQRT_2PI * (-0.5 * x * x).exp()
}

/// Standard normal quantile.
pub fn norm_quantile(p: f64) -> f64 {
    statrs::function::erf::erfc_inv(2.0 * p) * -std::f64::consts::SQRT_2
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl Link {
    pub fn apply(self, g: f64) -> f64 {
        match self {
            Link::Probit => norm_cdf(g),
            Link::Logit => sigmoid(g),
        }
    }

    /// `(log p, d log p / dg)` with `p = link(g)` floored at [`PROB_FLOOR`].
    fn log_p(self, g: f64) -> (f64, f64) {
        let p = self.apply(g);
        if p < PROB_FLOOR {
            return (PROB_FLOOR.ln(), 0.0);
        }
        match self {
            Link::Probit => (p.ln(), norm_pdf(g) / p),
            Link::Logit => (p.ln(), 1.0 - p),
        }
    }
}

/// `log C(n, k) + k log p + (n - k) log(1 - p)` with clipped `p`.
pub fn log_binomial_pmf(k: u32, n: u32, p: f64) -> f64 {
    let p = p.clamp(PROB_FLOOR, 1.0 - PROB_FLOOR);
    ln_binomial(u64::from(n), u64::from(k)) + f64::from(k) * p.ln() + f64::from(n - k) * (1.0 - p).ln()
}

/// Log-likelihood of `k` of `n` at latent value `g` and its derivative in `g`.
pub fn binomial_loglik(g: f64, k: u32, n: u32, link: Link) -> (f64, f64) {
    let (l, d) = kernel_loglik(g, k, n, link);
    (ln_binomial(u64::from(n), u64::from(k)) + l, d)
}

/// [`binomial_loglik`] without the binomial coefficient.
fn kernel_loglik(g: f64, k: u32, n: u32, link: Link) -> (f64, f64) {
    let (kf, rf) = (f64::from(k), f64::from(n - k));
    let (mut l, mut d) = (0.0, 0.0);
    if k > 0 {
        let (lp, dlp) = link.log_p(g);
        l += kf * lp;
        d += kf * dlp;
    }
    if k < n {
        // 1 - link(g) = link(-g) for both links
        let (lq, dlq) = link.log_p(-g);
        l += rf * lq;
        d -= rf * dlq;
    }
    (l, d)
}

/// `E[log Binomial(k | n, link(g))]` for `g ~ N(mean, var)`.
pub fn expected_log_lik(mean: f64, var: f64, k: u32, n: u32, link: Link, gh: &GaussHermite) -> f64 {
    gh.expect(mean, var, |g| binomial_loglik(g, k, n, link).0)
}

/// Expected log-likelihood together with its derivatives with respect to
/// the Gaussian mean and variance.
pub fn expected_log_lik_grad(mean: f64, var: f64, k: u32, n: u32, link: Link, gh: &GaussHermite) -> (f64, f64, f64) {
    let var = var.max(0.0);
    let s = (2.0 * var).sqrt();
    let (mut e, mut dm, mut dv) = (0.0, 0.0, 0.0);
    for (&x, &w) in gh.nodes.iter().zip(&gh.weights) {
        let (l, dl) = kernel_loglik(mean + s * x, k, n, link);
        e += w * l;
        dm += w * dl;
        // d g / d var = x / s
        if s > 0.0 {
            dv += w * dl * x / s;
        }
    }
    let inv = 1.0 / std::f64::consts::PI.sqrt();
    (ln_binomial(u64::from(n), u64::from(k)) + e * inv, dm * inv, dv * inv)
}
