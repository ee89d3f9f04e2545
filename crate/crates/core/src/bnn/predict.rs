use faer::Mat;
use rayon::prelude::*;

use super::arch::forward_logits;
use super::variational::BnnPosterior;
use crate::dataset::Scaling;
use crate::error::{Error, Result};
use crate::likelihood::{sigmoid, PROB_FLOOR};
use crate::posterior::{Posterior, Predictive};
use crate::rng::child_rng;

/// `c` draws of `f` at every `theta`, one row per weight draw. Draw `s`
/// uses the stream `(seed, s)`.
pub fn sample_outputs(post: &BnnPosterior, thetas: &[Vec<f64>], c: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    post.validate()?;
    let d = post.arch.input_dim;
    if let Some(t) = thetas.iter().find(|t| t.len() != d) {
        return Err(Error::DimensionMismatch { expected: d, actual: t.len() });
    }
    let x = Mat::from_fn(thetas.len(), d, |i, k| post.scaling.scale(&thetas[i])[k]);
    (0..c)
        .into_par_iter()
        .map(|s| {
            let xi = post.draw_noise(&mut child_rng(seed, &[s as u64]));
            let w = post.weights(&xi);
            let a = forward_logits(&post.arch, &w, x.as_ref())?;
            Ok(a.into_iter().map(|a| sigmoid(a).clamp(PROB_FLOOR, 1.0 - PROB_FLOOR)).collect())
        })
        .collect()
}

/// Empirical predictive from `c` posterior draws.
pub fn predict_bnn(post: &BnnPosterior, thetas: &[Vec<f64>], c: usize, seed: u64) -> Result<Vec<Predictive>> {
    if c < 2 {
        return Err(Error::InvalidArgument("need at least two predictive draws".into()));
    }
    let draws = sample_outputs(post, thetas, c, seed)?;
    Ok((0..thetas.len()).map(|j| Predictive::empirical(draws.iter().map(|row| row[j]).collect())).collect())
}

impl Posterior for BnnPosterior {
    fn scaling(&self) -> &Scaling {
        &self.scaling
    }

    fn training_trials(&self) -> Option<u32> {
        self.training_trials
    }

    fn predict(&self, thetas: &[Vec<f64>]) -> Result<Vec<Predictive>> {
        predict_bnn(self, thetas, self.n_samples, self.predict_seed)
    }

    fn sample_f(&self, thetas: &[Vec<f64>], c: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
        sample_outputs(self, thetas, c, seed)
    }
}
