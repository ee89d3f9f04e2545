use serde::{Deserialize, Serialize};

use crate::bnn::kl_weights;
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::gp::joint_kl_to_reference;
use crate::posterior::{Posterior, PosteriorBundle};

fn check(kl: f64, n: usize, epsilon: f64, c: f64) -> Result<()> {
    if n == 0 || !(kl >= 0.0) || !(epsilon > 0.0 && epsilon < 1.0) || !(c > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "PAC-Bayes needs n >= 1, kl >= 0, 0 < epsilon < 1 and C > 0 (got n={n}, kl={kl}, epsilon={epsilon}, C={c})"
        )));
    }
    Ok(())
}

/// Right-hand side of Catoni's bound at a given `λ`:
/// `emp + λC²/(8n) + (KL + ln(1/ε))/λ`.
pub fn catoni_rhs(emp: f64, kl: f64, n: usize, epsilon: f64, c: f64, lambda: f64) -> f64 {
    emp + lambda * c * c / (8.0 * n as f64) + (kl + (1.0 / epsilon).ln()) / lambda
}

/// `λ* = sqrt(8n(KL + ln(1/ε)) / C²)`, the minimizer of [`catoni_rhs`].
pub fn optimal_lambda(kl: f64, n: usize, epsilon: f64, c: f64) -> f64 {
    (8.0 * n as f64 * (kl + (1.0 / epsilon).ln()) / (c * c)).sqrt()
}

/// Catoni's bound at `λ*`, equal to `emp + C sqrt((KL + ln(1/ε)) / (2n))`.
pub fn pac_bayes_bound(emp: f64, kl: f64, n: usize, epsilon: f64, c: f64) -> Result<f64> {
    check(kl, n, epsilon, c)?;
    Ok(catoni_rhs(emp, kl, n, epsilon, c, optimal_lambda(kl, n, epsilon, c)))
}

/// KL between the trained posterior and its data-free prior. For the GP
/// both are restricted to the training inputs `thetas`; the prior is the
/// zero-mean GP with the pre-training kernel.
pub fn kl_for_pac(bundle: &PosteriorBundle, thetas: &[Vec<f64>]) -> Result<f64> {
    match bundle {
        PosteriorBundle::Gp(p) => {
            let x: Vec<Vec<f64>> = thetas.iter().map(|t| p.scaling.scale(t)).collect();
            Ok(joint_kl_to_reference(&p.state, &p.diagnostics.initial_kernel, &x)?.max(0.0))
        }
        PosteriorBundle::Bnn(p) => {
            p.validate()?;
            Ok(kl_weights(p))
        }
    }
}

/// Mean absolute error `δ(L̄, f)` over a dataset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpectedError {
    /// Average over posterior draws of the per-draw empirical error.
    pub mean: f64,
    /// Monte Carlo standard error of `mean`.
    pub std_error: f64,
    pub draws: usize,
    /// Error of the posterior mean prediction.
    pub mean_prediction: f64,
}

/// `E_{f~q}[(1/N) Σ_i |L̄_i − f(θ_i)|]` estimated from `c` posterior draws.
pub fn expected_errors(post: &dyn Posterior, ds: &Dataset, c: usize, seed: u64) -> Result<ExpectedError> {
    if ds.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if c < 2 {
        return Err(Error::InvalidArgument("need at least two posterior draws".into()));
    }
    let thetas = ds.thetas();
    let targets = ds.means();
    let n = targets.len() as f64;
    let per_draw: Vec<f64> = post
        .sample_f(&thetas, c, seed)?
        .iter()
        .map(|row| row.iter().zip(&targets).map(|(f, y)| (f - y).abs()).sum::<f64>() / n)
        .collect();
    let cf = c as f64;
    let mean = per_draw.iter().sum::<f64>() / cf;
    let var = per_draw.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (cf - 1.0);
    let preds = post.predict(&thetas)?;
    let mean_prediction = preds.iter().zip(&targets).map(|(p, y)| (p.mean() - y).abs()).sum::<f64>() / n;
    Ok(ExpectedError { mean, std_error: (var / cf).sqrt(), draws: c, mean_prediction })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PacBayesReport {
    pub empirical: ExpectedError,
    pub kl: f64,
    pub n: usize,
    pub epsilon: f64,
    pub c: f64,
    pub lambda: f64,
    pub bound: f64,
    /// Whether the prior was fitted on the training data, which voids the
    /// formal guarantee.
    pub data_dependent_prior: bool,
}

/// Catoni bound on the expected error of `bundle` using its training set.
pub fn pac_bayes_report(bundle: &PosteriorBundle, train: &Dataset, epsilon: f64, draws: usize, seed: u64) -> Result<PacBayesReport> {
    let empirical = expected_errors(bundle, train, draws, seed)?;
    let kl = kl_for_pac(bundle, &train.thetas())?;
    let n = train.len();
    let bound = pac_bayes_bound(empirical.mean, kl, n, epsilon, 1.0)?;
    let data_dependent_prior = matches!(bundle, PosteriorBundle::Bnn(p) if p.prior.pretrained);
    Ok(PacBayesReport { empirical, kl, n, epsilon, c: 1.0, lambda: optimal_lambda(kl, n, epsilon, 1.0), bound, data_dependent_prior })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{DataPoint, Role, Scaling};
    use crate::posterior::Predictive;
    use proptest::prelude::*;

    #[test]
    fn zero_kl_example() {
        let b = pac_bayes_bound(0.03, 0.0, 100, 0.05, 1.0).unwrap();
        assert!((b - 0.03 - (20f64.ln() / 200.0).sqrt()).abs() < 1e-12);
        assert!((b - 0.03 - 0.1224).abs() < 1e-4);
        assert!(pac_bayes_bound(0.0, 1.0, 10_000_000_000, 0.05, 1.0).unwrap() < 1e-4);
        assert!(pac_bayes_bound(0.0, -1.0, 10, 0.05, 1.0).is_err());
        assert!(pac_bayes_bound(0.0, 1.0, 0, 0.05, 1.0).is_err());
    }

    #[test]
    fn closed_form_is_grid_minimum() {
        for &(emp, kl, n, eps, c) in &[(0.02, 3.0, 500, 0.05, 1.0), (0.1, 0.0, 50, 0.2, 2.0), (0.0, 1234.5, 4000, 0.01, 1.0)] {
            let lam = optimal_lambda(kl, n, eps, c);
            let grid_min = (0..=200_000)
                .map(|i| catoni_rhs(emp, kl, n, eps, c, lam * (0.5 + i as f64 * 1e-5)))
                .fold(f64::INFINITY, f64::min);
            let b = pac_bayes_bound(emp, kl, n, eps, c).unwrap();
            assert!((b - grid_min).abs() < 1e-6, "{b} vs {grid_min}");
            assert!((b - emp - c * ((kl + (1.0 / eps).ln()) / (2.0 * n as f64)).sqrt()).abs() < 1e-12);
        }
    }

    struct Constant(f64, Scaling);

    impl Posterior for Constant {
        fn scaling(&self) -> &Scaling {
            &self.1
        }
        fn training_trials(&self) -> Option<u32> {
            None
        }
        fn predict(&self, t: &[Vec<f64>]) -> Result<Vec<Predictive>> {
            Ok(t.iter().map(|_| Predictive::empirical(vec![self.0; 2])).collect())
        }
        fn sample_f(&self, t: &[Vec<f64>], c: usize, _: u64) -> Result<Vec<Vec<f64>>> {
            Ok(vec![vec![self.0; t.len()]; c])
        }
    }

    #[test]
    fn constant_predictor_has_no_error() {
        let s = Scaling { lo: vec![0.0], hi: vec![1.0] };
        let pts = (0..6).map(|i| DataPoint { theta: vec![i as f64 / 5.0], successes: 5, trials: 10 }).collect();
        let ds = Dataset::new(Role::Test, pts, s.clone()).unwrap();
        let e = expected_errors(&Constant(0.5, s), &ds, 10, 0).unwrap();
        assert_eq!((e.mean, e.std_error, e.mean_prediction), (0.0, 0.0, 0.0));
    }

    proptest! {
        #[test]
        fn bound_monotone(emp in 0.0f64..1.0, kl in 0.0f64..100.0, dk in 0.0f64..10.0, n in 1usize..10_000, e in 0.01f64..0.5, de in 0.0f64..0.4) {
            let b = pac_bayes_bound(emp, kl, n, e, 1.0).unwrap();
            prop_assert!(pac_bayes_bound(emp, kl + dk, n, e, 1.0).unwrap() >= b);
            prop_assert!(pac_bayes_bound(emp, kl, n, (e + de).min(0.99), 1.0).unwrap() <= b);
            prop_assert!(b >= emp);
        }
    }
}
