use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::state::{q_g_marginals, GpVariationalState};
use super::train::GpDiagnostics;
use crate::dataset::Scaling;
use crate::error::Result;
use crate::likelihood::Link;
use crate::posterior::{Posterior, Predictive};
use crate::quadrature::GaussHermite;
use crate::rng::child_rng;

/// Trained sparse GP surrogate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpPosterior {
    pub state: GpVariationalState,
    pub scaling: Scaling,
    pub link: Link,
    pub n_nodes: usize,
    pub diagnostics: GpDiagnostics,
    #[serde(default)]
    pub training_trials: Option<u32>,
}

impl GpPosterior {
    /// Latent marginals at raw parameter values.
    pub fn latent(&self, thetas: &[Vec<f64>]) -> Result<(Vec<f64>, Vec<f64>)> {
        let x: Vec<Vec<f64>> = thetas.iter().map(|t| self.scaling.scale(t)).collect();
        q_g_marginals(&self.state, &x)
    }

    /// Indices of points outside the training box. Prediction still works
    /// there but is an extrapolation.
    pub fn out_of_domain(&self, thetas: &[Vec<f64>]) -> Vec<usize> {
        let (lo, hi) = (&self.scaling.lo, &self.scaling.hi);
        thetas
            .iter()
            .enumerate()
            .filter(|(_, t)| t.iter().enumerate().any(|(k, &x)| x < lo[k] || x > hi[k]))
            .map(|(i, _)| i)
            .collect()
    }
}

/// Mean and standard deviation of `link(g)` for `g ~ N(mean, var)`.
pub fn link_moments(mean: f64, var: f64, link: Link, gh: &GaussHermite) -> (f64, f64) {
    let m1 = gh.expect(mean, var, |g| link.apply(g));
    let m2 = gh.expect(mean, var, |g| link.apply(g).powi(2));
    (m1, (m2 - m1 * m1).max(0.0).sqrt())
}

impl Posterior for GpPosterior {
    fn scaling(&self) -> &Scaling {
        &self.scaling
    }

    fn training_trials(&self) -> Option<u32> {
        self.training_trials
    }

    fn predict(&self, thetas: &[Vec<f64>]) -> Result<Vec<Predictive>> {
        let (mu, var) = self.latent(thetas)?;
        let gh = GaussHermite::new(self.n_nodes);
        Ok(mu
            .into_iter()
            .zip(var)
            .map(|(m, v)| {
                let (mean, std) = link_moments(m, v, self.link, &gh);
                Predictive::Gaussian { latent_mean: m, latent_var: v, mean, std, link: self.link }
            })
            .collect())
    }

    /// Draws from the per-point marginals; points are sampled independently.
    fn sample_f(&self, thetas: &[Vec<f64>], c: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
        let (mu, var) = self.latent(thetas)?;
        let mut rng = child_rng(seed, &[]);
        Ok((0..c)
            .map(|_| {
                mu.iter()
                    .zip(&var)
                    .map(|(m, v)| {
                        let xi: f64 = rng.sample(StandardNormal);
                        self.link.apply(m + v.sqrt() * xi)
                    })
                    .collect()
            })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gp::kernel::RbfKernel;
    use crate::likelihood::norm_cdf;
    use proptest::prelude::*;

    fn posterior(eta: Vec<f64>) -> GpPosterior {
        let z = vec![vec![-0.5], vec![0.5]];
        let kernel = RbfKernel::new(&[0.7], 1.5);
        let mut state = GpVariationalState::prior(z, kernel.clone(), 1e-6).unwrap();
        state.eta = eta;
        GpPosterior {
            state,
            scaling: Scaling { lo: vec![0.0], hi: vec![2.0] },
            link: Link::Probit,
            n_nodes: 20,
            diagnostics: GpDiagnostics { final_elbo: 0.0, elbo_trace: vec![], steps: 0, m: 2, initial_kernel: kernel },
            training_trials: None,
        }
    }

    #[test]
    fn probit_mean_matches_closed_form() {
        // E[Φ(g)] = Φ(μ / sqrt(1 + σ²))
        let gh = GaussHermite::new(40);
        let (m, _) = link_moments(0.4, 0.8, Link::Probit, &gh);
        assert!((m - norm_cdf(0.4 / 1.8f64.sqrt())).abs() < 1e-8);
    }

    #[test]
    fn zero_latent_mean_has_median_half() {
        let post = posterior(vec![0.0, 0.0]);
        let p = post.predict(&[vec![1.0], vec![3.0]]).unwrap();
        assert_eq!(p[0].quantile(0.5), 0.5);
        assert!((p[0].mean() - 0.5).abs() < 1e-12);
        assert_eq!(post.out_of_domain(&[vec![1.0], vec![3.0]]), vec![1]);
    }

    #[test]
    fn std_vanishes_with_latent_variance() {
        let gh = GaussHermite::new(20);
        let (_, s) = link_moments(0.3, 1e-12, Link::Probit, &gh);
        assert!(s < 1e-6);
    }

    #[test]
    fn sampling_is_seeded() {
        let post = posterior(vec![1.0, -1.0]);
        let th = vec![vec![0.2], vec![1.7]];
        let a = post.sample_f(&th, 5, 3).unwrap();
        assert_eq!(a, post.sample_f(&th, 5, 3).unwrap());
        assert_ne!(a, post.sample_f(&th, 5, 4).unwrap());
        assert!(a.iter().flatten().all(|&f| (0.0..=1.0).contains(&f)));
    }

    proptest! {
        #[test]
        fn quantiles_bracket_the_mean(e0 in -3.0f64..3.0, e1 in -3.0f64..3.0, t in 0.0f64..2.0) {
            let post = posterior(vec![e0, e1]);
            let p = &post.predict(&[vec![t]]).unwrap()[0];
            let (lo, hi) = (p.quantile(0.025), p.quantile(0.975));
            prop_assert!(0.0 <= lo && lo <= p.mean() && p.mean() <= hi && hi <= 1.0);
            prop_assert!(p.std() > 0.0);
        }
    }
}
