//! Common interface over trained surrogates.

use serde::{Deserialize, Serialize};

use crate::dataset::Scaling;
use crate::error::Result;
use crate::likelihood::{norm_quantile, Link};

/// Predictive distribution of the satisfaction probability at one point.
#[derive(Debug, Clone, PartialEq)]
pub enum Predictive {
    /// `f = link(g)` with `g ~ N(latent_mean, latent_var)`.
    Gaussian { latent_mean: f64, latent_var: f64, mean: f64, std: f64, link: Link },
    /// Sorted draws of `f`.
    Empirical { samples: Vec<f64>, mean: f64, std: f64 },
}

impl Predictive {
    pub fn mean(&self) -> f64 {
        match self {
            Predictive::Gaussian { mean, .. } | Predictive::Empirical { mean, .. } => *mean,
        }
    }

    pub fn std(&self) -> f64 {
        match self {
            Predictive::Gaussian { std, .. } | Predictive::Empirical { std, .. } => *std,
        }
    }

    /// `p`-quantile of `f`. Gaussian: the link applied to the latent
    /// quantile. Empirical: the `⌈pC⌉`-th order statistic.
    pub fn quantile(&self, p: f64) -> f64 {
        match self {
            Predictive::Gaussian { latent_mean, latent_var, link, .. } => {
                if p == 0.5 {
                    return link.apply(*latent_mean);
                }
                link.apply(latent_mean + latent_var.max(0.0).sqrt() * norm_quantile(p))
            }
            Predictive::Empirical { samples, .. } => {
                let c = samples.len();
                // tolerance keeps products such as 0.025·40 from rounding up a rank
                let k = ((p * c as f64 - 1e-9).ceil() as usize).clamp(1, c);
                samples[k - 1]
            }
        }
    }

    /// Builds an empirical predictive; sorts `samples` in place.
    pub fn empirical(mut samples: Vec<f64>) -> Self {
        samples.sort_by(f64::total_cmp);
        if samples.first() == samples.last() {
            let mean = samples.first().copied().unwrap_or(f64::NAN);
            return Predictive::Empirical { samples, mean, std: 0.0 };
        }
        let c = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / c;
        let var = if samples.len() > 1 {
            samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (c - 1.0)
        } else {
            0.0
        };
        Predictive::Empirical { samples, mean, std: var.sqrt() }
    }
}

/// Anything that can be queried for predictions over the raw parameter space.
pub trait Posterior: Send + Sync {
    fn scaling(&self) -> &Scaling;

    /// Runs per point in the training data, when known.
    fn training_trials(&self) -> Option<u32>;

    /// Predictive distributions at raw parameter values.
    fn predict(&self, thetas: &[Vec<f64>]) -> Result<Vec<Predictive>>;

    /// `c` seeded draws of `f` at `thetas`, one row per draw.
    fn sample_f(&self, thetas: &[Vec<f64>], c: usize, seed: u64) -> Result<Vec<Vec<f64>>>;
}

/// Serializable union of the trained surrogates.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PosteriorBundle {
    Gp(crate::gp::GpPosterior),
    Bnn(crate::bnn::BnnPosterior),
}

impl PosteriorBundle {
    pub fn as_posterior(&self) -> &dyn Posterior {
        match self {
            PosteriorBundle::Gp(p) => p,
            PosteriorBundle::Bnn(p) => p,
        }
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        let f = std::io::BufWriter::new(std::fs::File::create(path)?);
        serde_json::to_writer(f, self)?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let f = std::io::BufReader::new(std::fs::File::open(path)?);
        Ok(serde_json::from_reader(f)?)
    }
}

impl Posterior for PosteriorBundle {
    fn scaling(&self) -> &Scaling {
        self.as_posterior().scaling()
    }

    fn training_trials(&self) -> Option<u32> {
        self.as_posterior().training_trials()
    }

    fn predict(&self, thetas: &[Vec<f64>]) -> Result<Vec<Predictive>> {
        self.as_posterior().predict(thetas)
    }

    fn sample_f(&self, thetas: &[Vec<f64>], c: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
        self.as_posterior().sample_f(thetas, c, seed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_median_is_link_of_mean() {
        let p = Predictive::Gaussian { latent_mean: 0.37, latent_var: 2.0, mean: 0.0, std: 0.0, link: Link::Probit };
        assert_eq!(p.quantile(0.5), Link::Probit.apply(0.37));
        let z = Predictive::Gaussian { latent_mean: 0.0, latent_var: 1.0, mean: 0.5, std: 0.1, link: Link::Probit };
        assert_eq!(z.quantile(0.5), 0.5);
        assert!(z.quantile(0.025) < z.quantile(0.975));
    }

    #[test]
    fn empirical_order_statistics() {
        let p = Predictive::empirical((1..=10).rev().map(|i| i as f64 / 11.0).collect());
        assert_eq!(p.quantile(0.1), 1.0 / 11.0);
        assert_eq!(p.quantile(0.15), 2.0 / 11.0);
        assert_eq!(p.quantile(1.0), 10.0 / 11.0);
        assert_eq!(p.quantile(0.0), 1.0 / 11.0);
        assert!((p.mean() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn degenerate_empirical() {
        let p = Predictive::empirical(vec![0.3; 50]);
        assert_eq!(p.std(), 0.0);
        assert_eq!(p.quantile(0.025), 0.3);
    }
}
