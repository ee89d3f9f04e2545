//! Binomial observations of the satisfaction function.
//!
//! A [`Dataset`] stores, for each parameter vector, how many of `M`
//! simulated runs satisfied the property. Per-run outcomes are aggregated
//! immediately since every downstream quantity only needs the counts.

mod generate;
mod io;
mod sampling;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pctmc::ParamSpace;

pub use generate::generate_dataset;
pub use io::{read_dataset, sidecar_path, write_dataset};
pub use sampling::{sample_parameters, SamplingStrategy};

/// What a dataset is used for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Train,
    Calibration,
    Test,
}

impl std::fmt::Display for Role {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Role::Train => "train",
            Role::Calibration => "calibration",
            Role::Test => "test",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataPoint {
    pub theta: Vec<f64>,
    pub successes: u32,
    pub trials: u32,
}

impl DataPoint {
    pub fn mean(&self) -> f64 {
        f64::from(self.successes) / f64::from(self.trials)
    }
}

/// Per-dimension affine map of the parameter box onto `[-1, 1]`.
///
/// Dimensions whose interval is a single point are mapped to 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaling {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Scaling {
    pub fn from_space(space: &ParamSpace) -> Self {
        Self {
            lo: space.bounds.iter().map(|b| b[0]).collect(),
            hi: space.bounds.iter().map(|b| b[1]).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn scale(&self, theta: &[f64]) -> Vec<f64> {
        theta
            .iter()
            .zip(self.lo.iter().zip(&self.hi))
            .map(|(&x, (&lo, &hi))| if hi > lo { 2.0 * (x - lo) / (hi - lo) - 1.0 } else { 0.0 })
            .collect()
    }

    pub fn unscale(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .map(|(&u, (&lo, &hi))| if hi > lo { lo + (u + 1.0) * 0.5 * (hi - lo) } else { lo })
            .collect()
    }
}

/// Provenance stored next to the data.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub model_hash: Option<String>,
    #[serde(default)]
    pub formula: Option<String>,
    #[serde(default)]
    pub horizon: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub role: Role,
    pub points: Vec<DataPoint>,
    pub scaling: Scaling,
    #[serde(default)]
    pub meta: DatasetMeta,
}

impl Dataset {
    /// Checks the counts and builds a dataset; every point must use the same
    /// number of trials.
    pub fn new(role: Role, points: Vec<DataPoint>, scaling: Scaling) -> Result<Self> {
        let ds = Self { role, points, scaling, meta: DatasetMeta::default() };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.scaling.dim();
        let m = self.points.first().map(|p| p.trials);
        for (i, p) in self.points.iter().enumerate() {
            if p.theta.len() != d {
                return Err(Error::DimensionMismatch { expected: d, actual: p.theta.len() });
            }
            if p.trials == 0 || p.successes > p.trials {
                return Err(Error::InvalidArgument(format!(
                    "point {i}: {} successes out of {} trials",
                    p.successes, p.trials
                )));
            }
            if Some(p.trials) != m {
                return Err(Error::InvalidArgument(format!(
                    "point {i} has {} trials, expected {} like the first point",
                    p.trials,
                    m.unwrap_or(0)
                )));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.scaling.dim()
    }

    /// Trials per point (`M`), or an error for an empty dataset.
    pub fn trials(&self) -> Result<u32> {
        self.points.first().map(|p| p.trials).ok_or(Error::EmptyDataset)
    }

    pub fn thetas(&self) -> Vec<Vec<f64>> {
        self.points.iter().map(|p| p.theta.clone()).collect()
    }

    /// Empirical satisfaction frequencies `L̄_i`.
    pub fn means(&self) -> Vec<f64> {
        self.points.iter().map(DataPoint::mean).collect()
    }

    pub fn with_meta(mut self, meta: DatasetMeta) -> Self {
        self.meta = meta;
        self
    }
}

/// Inputs of `ds` mapped onto `[-1, 1]^d` with the dataset's scaling.
pub fn scale_inputs(ds: &Dataset) -> Vec<Vec<f64>> {
    ds.points.iter().map(|p| ds.scaling.scale(&p.theta)).collect()
}

/// Scaled inputs and binomial counts, the form both surrogates train on.
#[derive(Debug, Clone, PartialEq)]
pub struct Observations {
    pub x: Vec<Vec<f64>>,
    pub successes: Vec<u32>,
    pub trials: Vec<u32>,
}

impl Observations {
    pub fn from_dataset(ds: &Dataset) -> Self {
        Self {
            x: scale_inputs(ds),
            successes: ds.points.iter().map(|p| p.successes).collect(),
            trials: ds.points.iter().map(|p| p.trials).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }
}

/// Statistical model checking estimate at one parameter point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmcEstimate {
    pub mean: f64,
    pub std: f64,
    pub ci_halfwidth: f64,
}

impl SmcEstimate {
    pub fn lo(&self) -> f64 {
        self.mean - self.ci_halfwidth
    }

    pub fn hi(&self) -> f64 {
        self.mean + self.ci_halfwidth
    }
}

/// Sample mean, Bessel-corrected sample standard deviation and the
/// half-width `z σ / sqrt(M)` of `successes` Bernoulli successes out of
/// `trials`.
pub fn smc_estimate(successes: u32, trials: u32, z: f64) -> SmcEstimate {
    assert!(trials > 0, "smc_estimate needs at least one trial");
    let m = f64::from(trials);
    let mean = f64::from(successes) / m;
    let std = if trials > 1 { (mean * (1.0 - mean) * m / (m - 1.0)).sqrt() } else { 0.0 };
    SmcEstimate { mean, std, ci_halfwidth: z * std / m.sqrt() }
}
