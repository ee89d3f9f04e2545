//! Distribution-free error bounds around a trained surrogate.
//!
//! Conformal bounds hold for the SMC estimate `L̄` at a new exchangeable
//! point; adding the Chernoff half-width moves the target to the exact
//! satisfaction probability at the cost of `ε₂` extra significance.

mod pac;
mod report;

pub use pac::{
    catoni_rhs, expected_errors, kl_for_pac, optimal_lambda, pac_bayes_bound, pac_bayes_report, ExpectedError, PacBayesReport,
};
pub use report::{bound_table, write_bound_table, BoundReport, BoundRow};

use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Role};
use crate::error::{Error, Result};
use crate::posterior::{Posterior, Predictive};

/// Lower clamp for per-point normalizers.
pub const NORMALIZER_FLOOR: f64 = 1e-6;

/// Per-point difficulty estimate `u(θ)` dividing the residuals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum Normalizer {
    Identity,
    PosteriorStd,
    /// Width of the central credible interval of the given coverage.
    CredibleWidth { level: f64 },
}

impl Normalizer {
    pub fn apply(&self, p: &Predictive) -> f64 {
        match *self {
            Normalizer::Identity => 1.0,
            Normalizer::PosteriorStd => p.std(),
            Normalizer::CredibleWidth { level } => {
                let a = 0.5 * (1.0 - level);
                p.quantile(1.0 - a) - p.quantile(a)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationScores {
    pub raw: Vec<f64>,
    pub normalized: Vec<f64>,
    pub normalizer: Normalizer,
    /// Points whose normalizer was raised to [`NORMALIZER_FLOOR`].
    pub floor_hits: usize,
}

/// `|L̄_i − mean(θ_i)|` over the calibration set, optionally divided by `u(θ_i)`.
///
/// Fails if the calibration runs per point differ from the training runs
/// per point, or if a normalizer is exactly zero. Positive normalizers
/// below [`NORMALIZER_FLOOR`] are clamped and counted.
pub fn nonconformity_scores(post: &dyn Posterior, cal: &Dataset, normalizer: Normalizer) -> Result<CalibrationScores> {
    if cal.role != Role::Calibration {
        return Err(Error::InvalidArgument(format!("expected a calibration dataset, got {}", cal.role)));
    }
    let trials = cal.trials()?;
    if let Some(training) = post.training_trials() {
        if training != trials {
            return Err(Error::TrialsMismatch { calibration: trials, training });
        }
    }
    let preds = post.predict(&cal.thetas())?;
    scores_from_predictions(&preds, &cal.means(), normalizer)
}

/// Scores from precomputed predictions and targets.
pub fn scores_from_predictions(preds: &[Predictive], targets: &[f64], normalizer: Normalizer) -> Result<CalibrationScores> {
    if preds.len() != targets.len() {
        return Err(Error::DimensionMismatch { expected: targets.len(), actual: preds.len() });
    }
    if preds.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut raw = Vec::with_capacity(preds.len());
    let mut normalized = Vec::with_capacity(preds.len());
    let mut floor_hits = 0;
    for (i, (p, &y)) in preds.iter().zip(targets).enumerate() {
        let r = (y - p.mean()).abs();
        let u = normalizer.apply(p);
        if !(u > 0.0) {
            return Err(Error::DegenerateNormalizer(i));
        }
        if u < NORMALIZER_FLOOR {
            floor_hits += 1;
        }
        raw.push(r);
        normalized.push(r / u.max(NORMALIZER_FLOOR));
    }
    Ok(CalibrationScores { raw, normalized, normalizer, floor_hits })
}

/// Rank `⌈(N+1)(1−ε)⌉` of the conformal quantile among `n` scores.
pub fn conformal_rank(n: usize, epsilon: f64) -> usize {
    // the tolerance keeps exact products such as 20·0.95 from rounding up
    ((n as f64 + 1.0) * (1.0 - epsilon) - 1e-9).ceil().max(1.0) as usize
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConformalQuantile {
    /// `+∞` when the rank exceeds the number of scores.
    pub tau: f64,
    pub rank: usize,
    pub vacuous: bool,
}

/// The `⌈(N+1)(1−ε)⌉`-th smallest score.
pub fn conformal_quantile(scores: &[f64], epsilon: f64) -> Result<ConformalQuantile> {
    check_eps(epsilon)?;
    if scores.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let rank = conformal_rank(scores.len(), epsilon);
    if rank > scores.len() {
        return Ok(ConformalQuantile { tau: f64::INFINITY, rank, vacuous: true });
    }
    let mut s = scores.to_vec();
    let (_, kth, _) = s.select_nth_unstable_by(rank - 1, f64::total_cmp);
    Ok(ConformalQuantile { tau: *kth, rank, vacuous: false })
}

fn check_eps(epsilon: f64) -> Result<()> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidArgument(format!("significance {epsilon} must lie in (0, 1)")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundKind {
    Icp,
    Nicp,
    IcpChernoff,
    NicpChernoff,
    PacBayes,
}

/// What the bound is a statement about.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Target {
    SmcEstimate,
    ExactSatisfactionFunction,
}

/// A conformal bound, optionally widened by a Chernoff term.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GuaranteeBound {
    pub kind: BoundKind,
    pub epsilon_total: f64,
    #[serde(with = "report::infinite_as_null")]
    pub tau: f64,
    pub rank: usize,
    pub vacuous: bool,
    pub normalizer: Normalizer,
    /// Constant added to every half-width; zero for plain conformal bounds.
    pub chernoff: f64,
    pub target: Target,
    pub floor_hits: usize,
}

impl GuaranteeBound {
    /// Half-width of the bound at a point with predictive `p`.
    pub fn half_width(&self, p: &Predictive) -> f64 {
        let u = match self.normalizer {
            Normalizer::Identity => 1.0,
            n => n.apply(p).max(NORMALIZER_FLOOR),
        };
        self.tau * u + self.chernoff
    }

    /// `[mean − w, mean + w]` intersected with `[0, 1]`.
    pub fn interval(&self, p: &Predictive) -> (f64, f64) {
        let w = self.half_width(p);
        ((p.mean() - w).max(0.0), (p.mean() + w).min(1.0))
    }

    pub fn covers(&self, p: &Predictive, target: f64) -> bool {
        (target - p.mean()).abs() <= self.half_width(p)
    }
}

/// Conformal bound with the given normalizer.
pub fn conformal_bound(post: &dyn Posterior, cal: &Dataset, epsilon: f64, normalizer: Normalizer) -> Result<GuaranteeBound> {
    let scores = nonconformity_scores(post, cal, normalizer)?;
    bound_from_scores(&scores, epsilon)
}

pub fn bound_from_scores(scores: &CalibrationScores, epsilon: f64) -> Result<GuaranteeBound> {
    let q = conformal_quantile(&scores.normalized, epsilon)?;
    let kind = if scores.normalizer == Normalizer::Identity { BoundKind::Icp } else { BoundKind::Nicp };
    Ok(GuaranteeBound {
        kind,
        epsilon_total: epsilon,
        tau: q.tau,
        rank: q.rank,
        vacuous: q.vacuous,
        normalizer: scores.normalizer,
        chernoff: 0.0,
        target: Target::SmcEstimate,
        floor_hits: scores.floor_hits,
    })
}

/// Constant-width bound from raw residuals.
pub fn icp_bound(post: &dyn Posterior, cal: &Dataset, epsilon: f64) -> Result<GuaranteeBound> {
    conformal_bound(post, cal, epsilon, Normalizer::Identity)
}

/// Per-point bound `τ̃ · std(θ)` from std-normalized residuals.
pub fn nicp_bound(post: &dyn Posterior, cal: &Dataset, epsilon: f64) -> Result<GuaranteeBound> {
    conformal_bound(post, cal, epsilon, Normalizer::PosteriorStd)
}

/// `T₂ = sqrt(ln(2/ε₂) / (2M))`, so that `2 exp(−2 M T₂²) = ε₂`.
pub fn chernoff_half_width(m: u32, epsilon2: f64) -> Result<f64> {
    check_eps(epsilon2)?;
    if m == 0 {
        return Err(Error::InvalidArgument("need at least one run per point".into()));
    }
    Ok(((2.0 / epsilon2).ln() / (2.0 * f64::from(m))).sqrt())
}

/// Moves a conformal bound on `L̄` to the exact satisfaction probability by
/// a union bound with the Chernoff inequality.
pub fn combined_bound(base: &GuaranteeBound, m: u32, epsilon2: f64) -> Result<GuaranteeBound> {
    let kind = match base.kind {
        BoundKind::Icp => BoundKind::IcpChernoff,
        BoundKind::Nicp => BoundKind::NicpChernoff,
        k => return Err(Error::InvalidArgument(format!("cannot widen a {k:?} bound"))),
    };
    if base.target != Target::SmcEstimate {
        return Err(Error::InvalidArgument("base bound already targets the exact function".into()));
    }
    let t2 = chernoff_half_width(m, epsilon2)?;
    let epsilon_total = base.epsilon_total + epsilon2;
    if epsilon_total >= 1.0 {
        return Err(Error::InvalidArgument(format!("total significance {epsilon_total} is vacuous")));
    }
    Ok(GuaranteeBound {
        kind,
        epsilon_total,
        chernoff: base.chernoff + t2,
        target: Target::ExactSatisfactionFunction,
        ..base.clone()
    })
}

/// Fraction of `ds` whose SMC estimate lies within the bound.
pub fn empirical_coverage(bound: &GuaranteeBound, preds: &[Predictive], targets: &[f64]) -> f64 {
    let hit = preds.iter().zip(targets).filter(|(p, &y)| bound.covers(p, y)).count();
    hit as f64 / targets.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::likelihood::Link;
    use crate::rng::rng_from_seed;
    use proptest::prelude::*;
    use rand::Rng;

    fn gauss(mean: f64, std: f64) -> Predictive {
        Predictive::Gaussian { latent_mean: 0.0, latent_var: 1.0, mean, std, link: Link::Probit }
    }

    #[test]
    fn hand_case_scores() {
        let preds = [gauss(0.2, 0.1), gauss(0.5, 0.1), gauss(0.9, 0.3)];
        let s = scores_from_predictions(&preds, &[0.3, 0.5, 0.6], Normalizer::PosteriorStd).unwrap();
        let want_raw = [0.1, 0.0, 0.3];
        let want_norm = [1.0, 0.0, 1.0];
        for i in 0..3 {
            assert!((s.raw[i] - want_raw[i]).abs() < 1e-12);
            assert!((s.normalized[i] - want_norm[i]).abs() < 1e-12);
        }
        let id = scores_from_predictions(&preds, &[0.3, 0.5, 0.6], Normalizer::Identity).unwrap();
        assert_eq!(id.raw, id.normalized);
    }

    #[test]
    fn normalizer_edge_cases() {
        let zero = [gauss(0.5, 0.0)];
        assert!(matches!(scores_from_predictions(&zero, &[0.4], Normalizer::PosteriorStd), Err(Error::DegenerateNormalizer(0))));
        let tiny = [gauss(0.5, 1e-9)];
        let s = scores_from_predictions(&tiny, &[0.4], Normalizer::PosteriorStd).unwrap();
        assert_eq!(s.floor_hits, 1);
        assert!((s.normalized[0] - 0.1 / NORMALIZER_FLOOR).abs() < 1e-6);
    }

    #[test]
    fn rank_examples() {
        assert_eq!(conformal_rank(200, 0.05), 191);
        assert_eq!(conformal_rank(19, 0.05), 19);
        let q = conformal_quantile(&[0.3], 0.05).unwrap();
        assert!(q.vacuous && q.tau.is_infinite() && q.rank == 2);
        let scores: Vec<f64> = (1..=200).map(f64::from).collect();
        assert_eq!(conformal_quantile(&scores, 0.05).unwrap().tau, 191.0);
        assert_eq!(conformal_quantile(&[0.7; 40], 0.2).unwrap().tau, 0.7);
        assert!(conformal_quantile(&scores, 1.0).is_err());
    }

    #[test]
    fn synthetic_coverage_at_rank() {
        // exchangeable N(0,1) magnitudes: the rank-191 threshold covers a fresh score ≥ 95% of the time
        let mut rng = rng_from_seed(5);
        let reps = 4000;
        let mut hits = 0;
        for _ in 0..reps {
            let s: Vec<f64> = (0..200).map(|_| rng.random::<f64>()).collect();
            let tau = conformal_quantile(&s, 0.05).unwrap().tau;
            hits += usize::from(rng.random::<f64>() <= tau);
        }
        let cov = hits as f64 / reps as f64;
        assert!(cov >= 0.95 - 3.0 * (0.95 * 0.05 / reps as f64).sqrt(), "coverage {cov}");
    }

    #[test]
    fn chernoff_values() {
        assert!((chernoff_half_width(500, 0.05).unwrap() - 0.0607).abs() < 1e-4);
        for &(m, e) in &[(500, 0.05), (50, 0.01), (1000, 0.3)] {
            let t = chernoff_half_width(m, e).unwrap();
            assert!((2.0 * (-2.0 * f64::from(m) * t * t).exp() - e).abs() < 1e-12);
        }
        assert!(chernoff_half_width(1_000_000_000, 0.05).unwrap() < 1e-4);
        assert!(chernoff_half_width(0, 0.05).is_err());
    }

    fn icp(tau: f64) -> GuaranteeBound {
        GuaranteeBound {
            kind: BoundKind::Icp,
            epsilon_total: 0.05,
            tau,
            rank: 191,
            vacuous: false,
            normalizer: Normalizer::Identity,
            chernoff: 0.0,
            target: Target::SmcEstimate,
            floor_hits: 0,
        }
    }

    #[test]
    fn combined_example() {
        let c = combined_bound(&icp(0.04), 500, 0.05).unwrap();
        let p = gauss(0.5, 0.2);
        assert!((c.half_width(&p) - 0.1007).abs() < 1e-4);
        assert!((c.epsilon_total - 0.10).abs() < 1e-12);
        assert_eq!(c.target, Target::ExactSatisfactionFunction);
        let z = combined_bound(&icp(0.0), 500, 0.05).unwrap();
        assert_eq!(z.half_width(&p), chernoff_half_width(500, 0.05).unwrap());
        assert!(combined_bound(&c, 500, 0.05).is_err());
        assert!(combined_bound(&icp(0.1), 500, 0.96).is_err());
    }

    #[test]
    fn constant_normalizer_matches_icp() {
        let preds: Vec<Predictive> = (0..50).map(|i| gauss(0.01 * i as f64, 0.07)).collect();
        let targets: Vec<f64> = (0..50).map(|i| 0.01 * i as f64 + ((i * 7 % 11) as f64 - 5.0) * 0.01).collect();
        let a = bound_from_scores(&scores_from_predictions(&preds, &targets, Normalizer::Identity).unwrap(), 0.1).unwrap();
        let b = bound_from_scores(&scores_from_predictions(&preds, &targets, Normalizer::PosteriorStd).unwrap(), 0.1).unwrap();
        for p in &preds {
            assert!((a.half_width(p) - b.half_width(p)).abs() < 1e-15);
        }
    }

    proptest! {
        #[test]
        fn quantile_is_permutation_invariant(mut s in prop::collection::vec(0.0f64..5.0, 1..60), seed in any::<u64>(), eps in 0.01f64..0.99) {
            let a = conformal_quantile(&s, eps).unwrap();
            use rand::seq::SliceRandom;
            s.shuffle(&mut rng_from_seed(seed));
            prop_assert_eq!(a, conformal_quantile(&s, eps).unwrap());
        }

        #[test]
        fn larger_epsilon_never_widens(s in prop::collection::vec(0.0f64..5.0, 1..60), e1 in 0.01f64..0.98, de in 0.0f64..0.5) {
            let e2 = (e1 + de).min(0.99);
            prop_assert!(conformal_quantile(&s, e2).unwrap().tau <= conformal_quantile(&s, e1).unwrap().tau);
        }

        #[test]
        fn combined_is_wider(tau in 0.0f64..1.0, m in 1u32..5000, e1 in 0.01f64..0.45, e2 in 0.01f64..0.45, sd in 0.001f64..0.5) {
            let mut base = icp(tau);
            base.epsilon_total = e1;
            let c = combined_bound(&base, m, e2).unwrap();
            let p = gauss(0.5, sd);
            prop_assert!(c.half_width(&p) >= base.half_width(&p));
            prop_assert!(c.half_width(&p) >= chernoff_half_width(m, e2).unwrap());
            prop_assert!((c.epsilon_total - (e1 + e2)).abs() < 1e-15);
        }

        #[test]
        fn nicp_width_proportional_to_std(sd in 0.001f64..0.5, tau in 0.0f64..3.0) {
            let mut b = icp(tau);
            b.kind = BoundKind::Nicp;
            b.normalizer = Normalizer::PosteriorStd;
            let p = gauss(0.3, sd);
            prop_assert!((b.half_width(&p) / sd - tau).abs() < 1e-9);
        }
    }
}
