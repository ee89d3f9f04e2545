use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How a reaction's rate depends on the population.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateLaw {
    /// `k * prod_j X_j (X_j - 1) ... (X_j - a_j + 1)`.
    MassAction,
    /// Mass action divided by the population size constant `N`.
    DensityScaled,
}

/// One reaction `sum_j a_j S_j -> sum_j b_j S_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct Reaction {
    pub label: String,
    /// Reactant stoichiometry, one entry per species.
    pub reactants: Vec<u32>,
    /// Product stoichiometry, one entry per species.
    pub products: Vec<u32>,
    pub rate_law: RateLaw,
    pub param_index: usize,
    /// Species whose counts enter the rate in place of the reactants.
    ///
    /// Needed for rate functions that depend on a catalyst that is not
    /// consumed (e.g. `L3p -> L3` firing at `k * L2p / N`). The reaction
    /// is still disabled whenever a reactant is exhausted.
    pub rate_factors: Option<Vec<u32>>,
}

impl Reaction {
    /// Net change `b - a` applied when the reaction fires.
    pub fn update_vector(&self) -> Vec<i64> {
        self.products
            .iter()
            .zip(&self.reactants)
            .map(|(&b, &a)| i64::from(b) - i64::from(a))
            .collect()
    }

    fn multiplicity(&self) -> u32 {
        self.reactants.iter().sum()
    }
}

/// Axis-aligned box of admissible parameter values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParamSpace {
    pub bounds: Vec<[f64; 2]>,
}

impl ParamSpace {
    pub fn new(bounds: Vec<[f64; 2]>) -> Self {
        Self { bounds }
    }

    /// `[lo, hi]^dim`.
    pub fn uniform(dim: usize, lo: f64, hi: f64) -> Self {
        Self { bounds: vec![[lo, hi]; dim] }
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    pub fn contains(&self, theta: &[f64]) -> bool {
        theta.len() == self.dim()
            && theta
                .iter()
                .zip(&self.bounds)
                .all(|(&x, &[lo, hi])| x >= lo && x <= hi)
    }
}

/// A parametric population CTMC.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModelFile", into = "ModelFile")]
pub struct PctmcModel {
    pub species: Vec<String>,
    pub init_state: Vec<u64>,
    pub reactions: Vec<Reaction>,
    pub param_names: Vec<String>,
    pub param_space: ParamSpace,
    pub population_size_constant: Option<u64>,
}

impl PctmcModel {
    pub fn n_species(&self) -> usize {
        self.species.len()
    }

    pub fn n_reactions(&self) -> usize {
        self.reactions.len()
    }

    pub fn species_index(&self, name: &str) -> Option<usize> {
        self.species.iter().position(|s| s == name)
    }

    /// Returns a copy whose parameter box is replaced by `space`.
    pub fn with_param_space(&self, space: ParamSpace) -> Self {
        Self { param_space: space, ..self.clone() }
    }
}

/// Lists every broken structural invariant; empty means the model is valid.
pub fn validate_model(model: &PctmcModel) -> Vec<String> {
    let mut violations = Vec::new();
    let n = model.n_species();

    let mut seen = HashSet::new();
    for name in &model.species {
        if !seen.insert(name.as_str()) {
            violations.push(format!("species `{name}` is declared more than once"));
        }
    }
    if model.init_state.len() != n {
        violations.push(format!(
            "init_state has {} entries but there are {n} species",
            model.init_state.len()
        ));
    }
    if model.param_space.dim() != model.n_reactions() {
        violations.push(format!(
            "{} reactions but the parameter space has dimension {}",
            model.n_reactions(),
            model.param_space.dim()
        ));
    }
    for (j, &[lo, hi]) in model.param_space.bounds.iter().enumerate() {
        if !(lo.is_finite() && hi.is_finite()) || lo < 0.0 || lo > hi {
            violations.push(format!("parameter {j} has an invalid interval [{lo}, {hi}]"));
        }
    }
    if !model.param_names.is_empty() && model.param_names.len() != model.param_space.dim() {
        violations.push(format!(
            "{} parameter names for a {}-dimensional parameter space",
            model.param_names.len(),
            model.param_space.dim()
        ));
    }

    for (i, r) in model.reactions.iter().enumerate() {
        let who = format!("reaction {i} (`{}`)", r.label);
        if r.reactants.len() != n || r.products.len() != n {
            violations.push(format!(
                "{who}: update vector has length {} but there are {n} species",
                r.reactants.len().max(r.products.len())
            ));
        }
        if let Some(f) = &r.rate_factors {
            if f.len() != n {
                violations.push(format!("{who}: rate factors have length {} instead of {n}", f.len()));
            }
        }
        if r.multiplicity() > 2 {
            violations.push(format!("{who}: total reactant multiplicity {} exceeds 2", r.multiplicity()));
        }
        if r.param_index >= model.param_space.dim() {
            violations.push(format!(
                "{who}: parameter index {} is outside the parameter space",
                r.param_index
            ));
        }
        if r.rate_law == RateLaw::DensityScaled && model.population_size_constant.unwrap_or(0) == 0 {
            violations.push(format!("{who}: density-scaled rate needs a positive population_size_constant"));
        }
    }
    violations
}

/// Falling factorial `x (x-1) ... (x-k+1)`; zero when `x < k`.
#[inline]
fn falling(x: u64, k: u32) -> f64 {
    let mut acc = 1.0;
    for s in 0..u64::from(k) {
        if x < s + 1 {
            return 0.0;
        }
        acc *= (x - s) as f64;
    }
    acc
}

/// Propensity without argument checks; used by the simulator.
#[inline]
pub(crate) fn propensity_unchecked(model: &PctmcModel, state: &[u64], params: &[f64], i: usize) -> f64 {
    let r = &model.reactions[i];
    let k = params[r.param_index];
    let mut a = k;
    for (&x, &alpha) in state.iter().zip(&r.reactants) {
        if x < u64::from(alpha) {
            return 0.0;
        }
    }
    let factors = r.rate_factors.as_deref().unwrap_or(&r.reactants);
    for (&x, &alpha) in state.iter().zip(factors) {
        if alpha > 0 {
            a *= falling(x, alpha);
        }
    }
    if r.rate_law == RateLaw::DensityScaled {
        a /= model.population_size_constant.unwrap_or(1) as f64;
    }
    a
}

/// Rate of reaction `reaction_index` in `state` under parameters `params`.
pub fn propensity(model: &PctmcModel, state: &[u64], params: &[f64], reaction_index: usize) -> Result<f64> {
    if reaction_index >= model.n_reactions() {
        return Err(Error::ReactionIndex { index: reaction_index, count: model.n_reactions() });
    }
    if state.len() != model.n_species() {
        return Err(Error::DimensionMismatch { expected: model.n_species(), actual: state.len() });
    }
    if params.len() != model.param_space.dim() {
        return Err(Error::DimensionMismatch { expected: model.param_space.dim(), actual: params.len() });
    }
    Ok(propensity_unchecked(model, state, params, reaction_index))
}

// On-disk representation: stoichiometries are maps keyed by species name.

#[derive(Serialize, Deserialize)]
struct ReactionFile {
    label: String,
    #[serde(default)]
    reactants: BTreeMap<String, u32>,
    #[serde(default)]
    products: BTreeMap<String, u32>,
    rate_law: RateLaw,
    param_index: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    rate_factors: Option<BTreeMap<String, u32>>,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    species: Vec<String>,
    init_state: Vec<u64>,
    reactions: Vec<ReactionFile>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    param_names: Vec<String>,
    param_space: ParamSpace,
    #[serde(default)]
    population_size_constant: Option<u64>,
}

fn dense(species: &[String], map: &BTreeMap<String, u32>, label: &str) -> std::result::Result<Vec<u32>, String> {
    let mut v = vec![0; species.len()];
    for (name, &c) in map {
        let j = species
            .iter()
            .position(|s| s == name)
            .ok_or_else(|| format!("reaction `{label}` mentions undeclared species `{name}`"))?;
        v[j] = c;
    }
    Ok(v)
}

fn sparse(species: &[String], v: &[u32]) -> BTreeMap<String, u32> {
    species
        .iter()
        .zip(v)
        .filter(|(_, &c)| c > 0)
        .map(|(s, &c)| (s.clone(), c))
        .collect()
}

impl TryFrom<ModelFile> for PctmcModel {
    type Error = String;

    fn try_from(f: ModelFile) -> std::result::Result<Self, String> {
        let reactions = f
            .reactions
            .into_iter()
            .map(|r| {
                Ok(Reaction {
                    reactants: dense(&f.species, &r.reactants, &r.label)?,
                    products: dense(&f.species, &r.products, &r.label)?,
                    rate_factors: r
                        .rate_factors
                        .as_ref()
                        .map(|m| dense(&f.species, m, &r.label))
                        .transpose()?,
                    rate_law: r.rate_law,
                    param_index: r.param_index,
                    label: r.label,
                })
            })
            .collect::<std::result::Result<Vec<_>, String>>()?;
        Ok(PctmcModel {
            species: f.species,
            init_state: f.init_state,
            reactions,
            param_names: f.param_names,
            param_space: f.param_space,
            population_size_constant: f.population_size_constant,
        })
    }
}

impl From<PctmcModel> for ModelFile {
    fn from(m: PctmcModel) -> Self {
        let reactions = m
            .reactions
            .iter()
            .map(|r| ReactionFile {
                label: r.label.clone(),
                reactants: sparse(&m.species, &r.reactants),
                products: sparse(&m.species, &r.products),
                rate_law: r.rate_law,
                param_index: r.param_index,
                rate_factors: r.rate_factors.as_ref().map(|f| sparse(&m.species, f)),
            })
            .collect();
        ModelFile {
            species: m.species,
            init_state: m.init_state,
            reactions,
            param_names: m.param_names,
            param_space: m.param_space,
            population_size_constant: m.population_size_constant,
        }
    }
}
