//! Parametric population continuous-time Markov chains.
//!
//! A [`PctmcModel`] fixes the species, the initial population and a list of
//! reactions whose rates depend on one parameter each; the parameter vector
//! ranges over a box [`ParamSpace`]. [`ssa_simulate`] samples exact
//! trajectories for a given parameter vector and [`random_pctmc`] draws
//! random well-formed models for scalability studies.

mod model;
mod random;
mod ssa;

pub use model::{propensity, validate_model, ParamSpace, PctmcModel, RateLaw, Reaction};
pub use random::{random_pctmc, random_pctmcs, ReactionShape};
pub use ssa::{ssa_simulate, Trajectory};

/// The epidemic model bundled with the crate (JSON source).
pub const SIR_JSON: &str = include_str!("../../models/sir.json");

/// Parses the bundled SIR model, with both β and γ free.
pub fn sir_model() -> PctmcModel {
    serde_json::from_str(SIR_JSON).expect("bundled sir.json is valid")
}

/// Which SIR parameters vary.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SirConfig {
    /// β in [0.005, 0.3], γ = 0.05.
    Beta,
    /// β = 0.12, γ in [0.005, 0.2].
    Gamma,
    /// Both free.
    BetaGamma,
}

/// The bundled SIR model with the parameter box of `config`.
pub fn sir_config(config: SirConfig) -> PctmcModel {
    let mut m = sir_model();
    match config {
        SirConfig::Beta => m.param_space.bounds[1] = [0.05, 0.05],
        SirConfig::Gamma => m.param_space.bounds[0] = [0.12, 0.12],
        SirConfig::BetaGamma => {}
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sir_configs_pin_one_parameter() {
        assert_eq!(sir_config(SirConfig::Beta).param_space.bounds, vec![[0.005, 0.3], [0.05, 0.05]]);
        assert_eq!(sir_config(SirConfig::Gamma).param_space.bounds, vec![[0.12, 0.12], [0.005, 0.2]]);
        assert_eq!(sir_config(SirConfig::BetaGamma), sir_model());
        assert!(validate_model(&sir_config(SirConfig::Beta)).is_empty());
    }
}
