//! Held-out evaluation of a trained surrogate against SMC estimates.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::{smc_estimate, Dataset, Role, SmcEstimate};
use crate::error::{Error, Result};
use crate::posterior::{Posterior, Predictive};

pub const DEFAULT_EPSILON: f64 = 0.05;
pub const DEFAULT_Z: f64 = 1.96;

/// Root mean squared residual between `targets` and predictive means.
pub fn rmse_from(preds: &[Predictive], targets: &[f64]) -> Result<f64> {
    check_len(preds.len(), targets.len())?;
    let ss: f64 = preds.iter().zip(targets).map(|(p, y)| (y - p.mean()).powi(2)).sum();
    Ok((ss / targets.len() as f64).sqrt())
}

/// `(q_{ε/2}, q_{1−ε/2})` of a predictive.
pub fn credible_interval(p: &Predictive, epsilon: f64) -> (f64, f64) {
    (p.quantile(epsilon / 2.0), p.quantile(1.0 - epsilon / 2.0))
}

/// Fraction of points whose credible interval meets the SMC confidence
/// interval `L̄ ± zσ/√M`.
pub fn accuracy_from(preds: &[Predictive], smc: &[SmcEstimate], epsilon: f64) -> Result<f64> {
    check_len(preds.len(), smc.len())?;
    let hits = preds
        .iter()
        .zip(smc)
        .filter(|(p, s)| {
            let (lo, hi) = credible_interval(p, epsilon);
            s.lo() <= hi && lo <= s.hi()
        })
        .count();
    Ok(hits as f64 / smc.len() as f64)
}

/// Mean credible-interval width.
pub fn uncertainty_width_from(preds: &[Predictive], epsilon: f64) -> Result<f64> {
    if preds.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let sum: f64 = preds.iter().map(|p| {
        let (lo, hi) = credible_interval(p, epsilon);
        hi - lo
    }).sum();
    Ok(sum / preds.len() as f64)
}

fn check_len(n: usize, m: usize) -> Result<()> {
    if n != m {
        return Err(Error::DimensionMismatch { expected: m, actual: n });
    }
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    Ok(())
}

fn check_z(z: f64) -> Result<()> {
    if !(z > 0.0) {
        return Err(Error::InvalidArgument(format!("z must be positive, got {z}")));
    }
    Ok(())
}

fn check_test(ds: &Dataset) -> Result<()> {
    if ds.role != Role::Test {
        return Err(Error::InvalidArgument(format!("expected a test dataset, got {}", ds.role)));
    }
    Ok(())
}

/// SMC estimates with confidence half-widths at every test point.
pub fn smc_estimates(ds: &Dataset, z: f64) -> Vec<SmcEstimate> {
    ds.points.iter().map(|p| smc_estimate(p.successes, p.trials, z)).collect()
}

/// Mean width `2zσ/√M` of the SMC confidence intervals.
pub fn smc_reference_width(ds: &Dataset, z: f64) -> Result<f64> {
    check_z(z)?;
    if ds.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok(smc_estimates(ds, z).iter().map(|s| 2.0 * s.ci_halfwidth).sum::<f64>() / ds.len() as f64)
}

pub fn rmse(post: &dyn Posterior, test: &Dataset) -> Result<f64> {
    check_test(test)?;
    rmse_from(&post.predict(&test.thetas())?, &test.means())
}

pub fn accuracy(post: &dyn Posterior, test: &Dataset, epsilon: f64, z: f64) -> Result<f64> {
    check_z(z)?;
    accuracy_from(&post.predict(&test.thetas())?, &smc_estimates(test, z), epsilon)
}

pub fn uncertainty_width(post: &dyn Posterior, test: &Dataset, epsilon: f64) -> Result<f64> {
    uncertainty_width_from(&post.predict(&test.thetas())?, epsilon)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointEvaluation {
    pub theta: Vec<f64>,
    pub smc_mean: f64,
    pub smc_lo: f64,
    pub smc_hi: f64,
    pub pred_mean: f64,
    pub cred_lo: f64,
    pub cred_hi: f64,
}

/// Aggregate metrics. `rmse` takes the square root of the mean squared
/// residual and accuracy intervals are centered at `L̄`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub rmse: f64,
    pub accuracy: f64,
    pub uncertainty_width: f64,
    /// Mean width of the SMC confidence intervals.
    pub test_uncertainty_width: f64,
    pub epsilon: f64,
    pub z: f64,
    pub n_test: usize,
    pub trials: u32,
    #[serde(skip)]
    pub per_point: Vec<PointEvaluation>,
}

pub fn evaluate(post: &dyn Posterior, test: &Dataset, epsilon: f64, z: f64) -> Result<EvaluationReport> {
    check_test(test)?;
    check_z(z)?;
    let preds = post.predict(&test.thetas())?;
    let smc = smc_estimates(test, z);
    let per_point = test
        .points
        .iter()
        .zip(&preds)
        .zip(&smc)
        .map(|((d, p), s)| {
            let (cred_lo, cred_hi) = credible_interval(p, epsilon);
            PointEvaluation {
                theta: d.theta.clone(),
                smc_mean: s.mean,
                smc_lo: s.lo(),
                smc_hi: s.hi(),
                pred_mean: p.mean(),
                cred_lo,
                cred_hi,
            }
        })
        .collect();
    Ok(EvaluationReport {
        rmse: rmse_from(&preds, &test.means())?,
        accuracy: accuracy_from(&preds, &smc, epsilon)?,
        uncertainty_width: uncertainty_width_from(&preds, epsilon)?,
        test_uncertainty_width: smc_reference_width(test, z)?,
        epsilon,
        z,
        n_test: test.len(),
        trials: test.trials()?,
        per_point,
    })
}

impl EvaluationReport {
    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    /// Columns `theta_*, smc_mean, smc_lo, smc_hi, pred_mean, cred_lo, cred_hi`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let d = self.per_point.first().map_or(0, |r| r.theta.len());
        let mut w = csv::Writer::from_path(path)?;
        let mut header: Vec<String> = (0..d).map(|k| format!("theta_{k}")).collect();
        header.extend(["smc_mean", "smc_lo", "smc_hi", "pred_mean", "cred_lo", "cred_hi"].map(String::from));
        w.write_record(&header)?;
        for r in &self.per_point {
            let rest = [r.smc_mean, r.smc_lo, r.smc_hi, r.pred_mean, r.cred_lo, r.cred_hi];
            w.write_record(r.theta.iter().chain(&rest).map(f64::to_string))?;
        }
        w.flush()?;
        Ok(())
    }
}
