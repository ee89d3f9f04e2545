use std::path::Path;

use serde::{Deserialize, Serialize};

use super::pac::PacBayesReport;
use super::GuaranteeBound;
use crate::error::{Error, Result};
use crate::posterior::Posterior;

/// Stores `+∞` as JSON `null`.
pub(crate) mod infinite_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        if x.is_finite() {
            s.serialize_f64(*x)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub n_calibration: usize,
    pub trials: u32,
    pub bounds: Vec<GuaranteeBound>,
    pub pac_bayes: Option<PacBayesReport>,
}

impl BoundReport {
    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundRow {
    pub theta: Vec<f64>,
    pub mean: f64,
    pub std: f64,
    pub lower: f64,
    pub upper: f64,
}

/// Per-point intervals of `bound` at `thetas`.
pub fn bound_table(bound: &GuaranteeBound, post: &dyn Posterior, thetas: &[Vec<f64>]) -> Result<Vec<BoundRow>> {
    let preds = post.predict(thetas)?;
    Ok(thetas
        .iter()
        .zip(&preds)
        .map(|(t, p)| {
            let (lower, upper) = bound.interval(p);
            BoundRow { theta: t.clone(), mean: p.mean(), std: p.std(), lower, upper }
        })
        .collect())
}

/// CSV with columns `theta_0..theta_{d-1}, mean, std, lower, upper`.
pub fn write_bound_table(path: &Path, rows: &[BoundRow]) -> Result<()> {
    let d = rows.first().map_or(0, |r| r.theta.len());
    let mut w = csv::Writer::from_path(path)?;
    let mut header: Vec<String> = (0..d).map(|k| format!("theta_{k}")).collect();
    header.extend(["mean", "std", "lower", "upper"].map(String::from));
    w.write_record(&header)?;
    for r in rows {
        if r.theta.len() != d {
            return Err(Error::DimensionMismatch { expected: d, actual: r.theta.len() });
        }
        let rec: Vec<String> = r.theta.iter().chain([&r.mean, &r.std, &r.lower, &r.upper]).map(f64::to_string).collect();
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::guarantees::{BoundKind, Normalizer, Target};

    #[test]
    fn vacuous_bound_round_trips() {
        let b = GuaranteeBound {
            kind: BoundKind::Nicp,
            epsilon_total: 0.05,
            tau: f64::INFINITY,
            rank: 2,
            vacuous: true,
            normalizer: Normalizer::PosteriorStd,
            chernoff: 0.0,
            target: Target::SmcEstimate,
            floor_hits: 0,
        };
        let r = BoundReport { n_calibration: 1, trials: 50, bounds: vec![b], pac_bayes: None };
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("b.json");
        r.save(&p).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.contains("\"tau\": null") && text.contains("\"kind\": \"nicp\""));
        assert_eq!(BoundReport::load(&p).unwrap(), r);
    }

    #[test]
    fn table_csv_layout() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.csv");
        let rows = vec![BoundRow { theta: vec![0.1, 0.2], mean: 0.5, std: 0.1, lower: 0.4, upper: 0.6 }];
        write_bound_table(&p, &rows).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert_eq!(text, "theta_0,theta_1,mean,std,lower,upper\n0.1,0.2,0.5,0.1,0.4,0.6\n");
    }
}
