use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use smmc::bnn::BnnConfig;
use smmc::dataset::SamplingStrategy;
use smmc::gp::GpConfig;
use smmc::guarantees::Normalizer;
use smmc::pctmc::{sir_config, validate_model, PctmcModel, SirConfig};
use smmc::stl::{parse_stl, CompiledFormula, StlFormula};
use smmc::{Error, Result};

/// Where the model comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelSource {
    /// A model shipped with the tool: `sir-beta`, `sir-gamma` or
    /// `sir-beta-gamma` (alias `sir`).
    Builtin(String),
    Path(PathBuf),
    /// `count` random mass-action models with `reactions` reactions each.
    Random { reactions: usize, seed: u64, count: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    Gp,
    Bnn,
}

impl FromStr for Backend {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gp" => Ok(Backend::Gp),
            "bnn" => Ok(Backend::Bnn),
            _ => Err(Error::InvalidArgument(format!("unknown backend `{s}` (expected gp or bnn)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Sizes {
    pub n_train: usize,
    pub m_train: u32,
    /// Calibration points; they use `m_train` runs each.
    pub n_cal: usize,
    pub n_test: usize,
    pub m_test: u32,
}

impl Default for Sizes {
    fn default() -> Self {
        Self { n_train: 500, m_train: 50, n_cal: 200, n_test: 1000, m_test: 1000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GuaranteeSettings {
    pub epsilon: f64,
    /// Significance spent on the Chernoff correction.
    pub epsilon2: f64,
    pub normalizer: Normalizer,
    pub pac_epsilon: f64,
    /// Posterior draws for the PAC-Bayes empirical error.
    pub pac_draws: usize,
}

impl Default for GuaranteeSettings {
    fn default() -> Self {
        Self { epsilon: 0.05, epsilon2: 0.05, normalizer: Normalizer::PosteriorStd, pac_epsilon: 0.05, pac_draws: 1000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricSettings {
    pub epsilon: f64,
    pub z: f64,
}

impl Default for MetricSettings {
    fn default() -> Self {
        Self { epsilon: smmc::metrics::DEFAULT_EPSILON, z: smmc::metrics::DEFAULT_Z }
    }
}

/// Everything a pipeline run needs. The global `seed` replaces the seeds
/// inside `gp` and `bnn`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelSource,
    pub formula: String,
    /// Simulation horizon; defaults to the formula's own horizon.
    pub horizon: Option<f64>,
    pub sizes: Sizes,
    pub sampling: SamplingStrategy,
    pub backend: Backend,
    pub gp: GpConfig,
    pub bnn: BnnConfig,
    pub guarantees: GuaranteeSettings,
    pub metrics: MetricSettings,
    pub out_dir: PathBuf,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            model: ModelSource::Builtin("sir-beta".into()),
            formula: "(I > 0) U[100,120] (I == 0)".into(),
            horizon: None,
            sizes: Sizes::default(),
            sampling: SamplingStrategy::UniformRandom,
            backend: Backend::Gp,
            gp: GpConfig::default(),
            bnn: BnnConfig::default(),
            guarantees: GuaranteeSettings::default(),
            metrics: MetricSettings::default(),
            out_dir: PathBuf::from("run"),
            seed: 0,
        }
    }
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

fn unit_open(name: &str, x: f64) -> Result<()> {
    if x > 0.0 && x < 1.0 {
        Ok(())
    } else {
        Err(invalid(format!("{name} must lie in (0, 1), got {x}")))
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn parsed_formula(&self) -> Result<StlFormula> {
        parse_stl(&self.formula)
    }

    pub fn horizon(&self) -> Result<f64> {
        Ok(match self.horizon {
            Some(h) => h,
            None => self.parsed_formula()?.horizon(),
        })
    }

    /// The models named by `model`, each with a subdirectory name (empty
    /// for a single model).
    pub fn models(&self) -> Result<Vec<(String, PctmcModel)>> {
        match &self.model {
            ModelSource::Builtin(name) => {
                let c = match name.as_str() {
                    "sir-beta" => SirConfig::Beta,
                    "sir-gamma" => SirConfig::Gamma,
                    "sir-beta-gamma" | "sir" => SirConfig::BetaGamma,
                    _ => return Err(invalid(format!("unknown builtin model `{name}`"))),
                };
                Ok(vec![(String::new(), sir_config(c))])
            }
            ModelSource::Path(p) => {
                let m: PctmcModel = serde_json::from_str(&std::fs::read_to_string(p)?)?;
                Ok(vec![(String::new(), m)])
            }
            &ModelSource::Random { reactions, seed, count } => {
                let ms = smmc::pctmc::random_pctmcs(reactions, count, seed)?;
                if count == 1 {
                    return Ok(ms.into_iter().map(|m| (String::new(), m)).collect());
                }
                Ok(ms.into_iter().enumerate().map(|(i, m)| (format!("model_{i}"), m)).collect())
            }
        }
    }

    /// Checks sizes, significances, back-end settings, the formula and the
    /// models, without touching the output directory.
    pub fn validate(&self) -> Result<()> {
        let s = &self.sizes;
        if s.n_train == 0 || s.m_train == 0 || s.n_cal == 0 || s.n_test == 0 || s.m_test == 0 {
            return Err(invalid("all dataset sizes must be at least 1"));
        }
        let g = &self.guarantees;
        unit_open("guarantees.epsilon", g.epsilon)?;
        unit_open("guarantees.epsilon2", g.epsilon2)?;
        unit_open("guarantees.pac_epsilon", g.pac_epsilon)?;
        if g.epsilon + g.epsilon2 >= 1.0 {
            return Err(invalid("guarantees.epsilon + guarantees.epsilon2 must stay below 1"));
        }
        if g.pac_draws < 2 {
            return Err(invalid("guarantees.pac_draws must be at least 2"));
        }
        if let Normalizer::CredibleWidth { level } = g.normalizer {
            unit_open("normalizer level", level)?;
        }
        unit_open("metrics.epsilon", self.metrics.epsilon)?;
        if !(self.metrics.z > 0.0) {
            return Err(invalid("metrics.z must be positive"));
        }
        let gp = &self.gp;
        if gp.m_max == 0 || gp.batch_size == 0 || gp.n_nodes == 0 || gp.epochs == 0 {
            return Err(invalid("gp.m_max, gp.batch_size, gp.n_nodes and gp.epochs must be positive"));
        }
        if !(gp.learning_rate >= 0.0) || !(gp.init_lengthscale > 0.0) || !(gp.init_variance > 0.0) || !(gp.jitter_rel > 0.0) {
            return Err(invalid("gp.learning_rate must be >= 0 and lengthscale, variance and jitter positive"));
        }
        let b = &self.bnn;
        if b.hidden_widths.is_empty() || b.hidden_widths.contains(&0) {
            return Err(invalid("bnn.hidden_widths must be a nonempty list of positive widths"));
        }
        if b.batch_size == 0 || b.n_mc == 0 || b.n_samples < 2 || b.epochs == 0 || !(b.learning_rate >= 0.0) {
            return Err(invalid("bnn.batch_size, n_mc, epochs must be positive, n_samples >= 2, learning_rate >= 0"));
        }
        if !(b.leaky_slope >= 0.0 && b.leaky_slope < 1.0) {
            return Err(invalid("bnn.leaky_slope must lie in [0, 1)"));
        }
        if let ModelSource::Random { reactions, count, .. } = self.model {
            if reactions == 0 || count == 0 {
                return Err(invalid("random models need at least one reaction and count >= 1"));
            }
        }
        let formula = self.parsed_formula()?;
        let horizon = self.horizon()?;
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(invalid(format!("horizon must be positive and finite, got {horizon}")));
        }
        if formula.horizon() > horizon {
            return Err(Error::HorizonTooShort { required: formula.horizon(), available: horizon });
        }
        for (_, m) in self.models()? {
            let v = validate_model(&m);
            if !v.is_empty() {
                return Err(Error::InvalidModel(v));
            }
            CompiledFormula::new(&formula, &m.species)?;
        }
        Ok(())
    }
}
