use std::collections::HashSet;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::model::{ParamSpace, PctmcModel, RateLaw, Reaction};
use crate::error::{Error, Result};
use crate::rng::child_rng;

/// The five reaction templates used by the random generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ReactionShape {
    /// `S_i + S_j -> S_k`
    Binding,
    /// `S_i -> S_j + S_k`
    Splitting,
    /// `S_i -> S_j`
    Conversion,
    /// `S_i -> 0`
    Degradation,
    /// `0 -> S_i`
    Production,
}

impl ReactionShape {
    pub const ALL: [ReactionShape; 5] = [
        ReactionShape::Binding,
        ReactionShape::Splitting,
        ReactionShape::Conversion,
        ReactionShape::Degradation,
        ReactionShape::Production,
    ];

    /// Sampling probability of each template.
    pub fn probability(self) -> f64 {
        match self {
            ReactionShape::Binding | ReactionShape::Splitting | ReactionShape::Conversion => 0.25,
            ReactionShape::Degradation | ReactionShape::Production => 0.125,
        }
    }

    /// Recognizes the template of a reaction from its stoichiometry.
    pub fn classify(r: &Reaction) -> Option<ReactionShape> {
        let a: u32 = r.reactants.iter().sum();
        let b: u32 = r.products.iter().sum();
        match (a, b) {
            (2, 1) => Some(ReactionShape::Binding),
            (1, 2) => Some(ReactionShape::Splitting),
            (1, 1) => Some(ReactionShape::Conversion),
            (1, 0) => Some(ReactionShape::Degradation),
            (0, 1) => Some(ReactionShape::Production),
            _ => None,
        }
    }

    fn sample<R: Rng + ?Sized>(rng: &mut R) -> Self {
        // probabilities are multiples of 1/8
        match rng.random_range(0..8u32) {
            0 | 1 => ReactionShape::Binding,
            2 | 3 => ReactionShape::Splitting,
            4 | 5 => ReactionShape::Conversion,
            6 => ReactionShape::Degradation,
            _ => ReactionShape::Production,
        }
    }

    fn instantiate<R: Rng + ?Sized>(self, n: usize, rng: &mut R) -> (Vec<u32>, Vec<u32>) {
        let mut a = vec![0u32; n];
        let mut b = vec![0u32; n];
        let mut pick = || rng.random_range(0..n);
        match self {
            ReactionShape::Binding => {
                a[pick()] += 1;
                a[pick()] += 1;
                b[pick()] += 1;
            }
            ReactionShape::Splitting => {
                a[pick()] += 1;
                b[pick()] += 1;
                b[pick()] += 1;
            }
            ReactionShape::Conversion => {
                let i = pick();
                let mut j = pick();
                while j == i {
                    j = pick();
                }
                a[i] = 1;
                b[j] = 1;
            }
            ReactionShape::Degradation => a[pick()] = 1,
            ReactionShape::Production => b[pick()] = 1,
        }
        (a, b)
    }
}

const MAX_SPECIES_RESAMPLES: usize = 10_000;

/// Draws a random mass-action model with `r` reactions over at most `r + 1`
/// species, parameter box `[0.001, 1]^r` and initial counts in `0..=10`.
///
/// Reaction templates are drawn first; when the drawn species make a
/// reaction identical to an earlier one only the species are redrawn, so
/// template frequencies are unaffected by the non-redundancy filter.
/// Species that no reaction touches are removed.
pub fn random_pctmc<R: Rng + ?Sized>(r: usize, rng: &mut R) -> Result<PctmcModel> {
    if r < 1 {
        return Err(Error::InvalidArgument("a random model needs at least one reaction".into()));
    }
    let n = r + 1;
    let mut seen = HashSet::new();
    let mut stoich = Vec::with_capacity(r);
    for _ in 0..r {
        let shape = ReactionShape::sample(rng);
        let mut attempts = 0;
        let pair = loop {
            let pair = shape.instantiate(n, rng);
            if !seen.contains(&pair) {
                break pair;
            }
            attempts += 1;
            if attempts > MAX_SPECIES_RESAMPLES {
                // cannot happen for n = r + 1: every template has at least n distinct instances
                return Err(Error::InvalidArgument(format!("could not place a distinct {shape:?} reaction")));
            }
        };
        seen.insert(pair.clone());
        stoich.push(pair);
    }
    let init: Vec<u64> = (0..n).map(|_| rng.random_range(0..=10u64)).collect();

    let used: Vec<usize> = (0..n)
        .filter(|&j| stoich.iter().any(|(a, b)| a[j] > 0 || b[j] > 0))
        .collect();
    let keep = |v: &[u32]| used.iter().map(|&j| v[j]).collect::<Vec<_>>();
    let reactions = stoich
        .iter()
        .enumerate()
        .map(|(i, (a, b))| Reaction {
            label: format!("R{}", i + 1),
            reactants: keep(a),
            products: keep(b),
            rate_law: RateLaw::MassAction,
            param_index: i,
            rate_factors: None,
        })
        .collect();
    Ok(PctmcModel {
        species: used.iter().map(|&j| format!("S{}", j + 1)).collect(),
        init_state: used.iter().map(|&j| init[j]).collect(),
        reactions,
        param_names: (1..=r).map(|i| format!("k{i}")).collect(),
        param_space: ParamSpace::uniform(r, 0.001, 1.0),
        population_size_constant: None,
    })
}

/// `count` independent random models with `r` reactions, model `i` drawn
/// from the stream derived from `(seed, r, i)`.
pub fn random_pctmcs(r: usize, count: usize, seed: u64) -> Result<Vec<PctmcModel>> {
    (0..count)
        .map(|i| random_pctmc(r, &mut child_rng(seed, &[r as u64, i as u64])))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pctmc::validate_model;
    use crate::rng::rng_from_seed;
    use proptest::prelude::*;

    fn non_redundant(m: &PctmcModel) -> bool {
        let mut seen = HashSet::new();
        let distinct = m.reactions.iter().all(|r| seen.insert((r.reactants.clone(), r.products.clone())));
        let all_used = (0..m.n_species()).all(|j| m.reactions.iter().any(|r| r.reactants[j] + r.products[j] > 0));
        distinct && all_used
    }

    #[test]
    fn single_reaction_model() {
        for seed in 0..200 {
            let m = random_pctmc(1, &mut rng_from_seed(seed)).unwrap();
            assert_eq!(m.n_reactions(), 1);
            assert!(m.n_species() <= 2);
            assert_eq!(m.param_space.bounds, vec![[0.001, 1.0]]);
        }
    }

    #[test]
    fn zero_reactions_is_an_error() {
        assert!(random_pctmc(0, &mut rng_from_seed(0)).is_err());
    }

    #[test]
    fn deterministic_per_seed() {
        let a = random_pctmc(6, &mut rng_from_seed(11)).unwrap();
        let b = random_pctmc(6, &mut rng_from_seed(11)).unwrap();
        assert_eq!(a, b);
        assert_eq!(random_pctmcs(4, 5, 2).unwrap(), random_pctmcs(4, 5, 2).unwrap());
    }

    #[test]
    fn template_frequencies_are_multinomial() {
        let draws = 100_000;
        let mut counts = [0usize; 5];
        let mut rng = rng_from_seed(99);
        for _ in 0..draws / 4 {
            let m = random_pctmc(4, &mut rng).unwrap();
            for r in &m.reactions {
                let s = ReactionShape::classify(r).unwrap();
                counts[ReactionShape::ALL.iter().position(|&x| x == s).unwrap()] += 1;
            }
        }
        let total = counts.iter().sum::<usize>() as f64;
        assert_eq!(total as usize, draws);
        for (c, shape) in counts.iter().zip(ReactionShape::ALL) {
            let p = shape.probability();
            let sd = (total * p * (1.0 - p)).sqrt();
            assert!((*c as f64 - total * p).abs() < 3.0 * sd, "{shape:?}: {c} vs {}", total * p);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn generated_models_are_valid(r in 1usize..21, seed in any::<u64>()) {
            let m = random_pctmc(r, &mut rng_from_seed(seed)).unwrap();
            prop_assert!(validate_model(&m).is_empty(), "{:?}", validate_model(&m));
            prop_assert!(non_redundant(&m));
            prop_assert_eq!(m.n_reactions(), r);
            prop_assert!(m.n_species() <= r + 1);
            prop_assert!(m.init_state.iter().all(|&x| x <= 10));
        }
    }
}
