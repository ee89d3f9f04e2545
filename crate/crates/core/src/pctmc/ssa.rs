use rand::Rng;
use rand_distr::Open01;
use serde::{Deserialize, Serialize};

use super::model::{propensity_unchecked, PctmcModel};
use crate::error::{Error, Result};

/// Event-based sample path of a population CTMC.
///
/// State `k` holds on `[times[k], times[k+1])`; the last state holds up to
/// `horizon`. States are stored row-major in a flat buffer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<u64>,
    pub n_species: usize,
    pub horizon: f64,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn state(&self, k: usize) -> &[u64] {
        &self.states[k * self.n_species..(k + 1) * self.n_species]
    }

    pub fn final_state(&self) -> &[u64] {
        self.state(self.len() - 1)
    }

    /// Counts of species `j` at every jump.
    pub fn species(&self, j: usize) -> impl Iterator<Item = u64> + '_ {
        self.states.iter().skip(j).step_by(self.n_species).copied()
    }

    /// State in force at time `t` (clamped to `[0, horizon]`).
    pub fn state_at(&self, t: f64) -> &[u64] {
        let k = self.times.partition_point(|&s| s <= t).max(1) - 1;
        self.state(k)
    }
}

/// Gillespie's direct method up to `horizon`.
pub fn ssa_simulate<R: Rng + ?Sized>(
    model: &PctmcModel,
    params: &[f64],
    horizon: f64,
    rng: &mut R,
) -> Result<Trajectory> {
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(Error::InvalidArgument(format!("horizon must be positive and finite, got {horizon}")));
    }
    if params.len() != model.param_space.dim() {
        return Err(Error::DimensionMismatch { expected: model.param_space.dim(), actual: params.len() });
    }
    if model.init_state.len() != model.n_species() {
        return Err(Error::DimensionMismatch { expected: model.n_species(), actual: model.init_state.len() });
    }
    let n = model.n_species();
    let updates: Vec<Vec<i64>> = model.reactions.iter().map(|r| r.update_vector()).collect();
    let mut x = model.init_state.clone();
    let mut times = vec![0.0];
    let mut states = x.clone();
    let mut props = vec![0.0; model.n_reactions()];
    let mut t = 0.0;

    loop {
        let mut a0 = 0.0;
        for (i, p) in props.iter_mut().enumerate() {
            *p = propensity_unchecked(model, &x, params, i);
            a0 += *p;
        }
        if a0 <= 0.0 {
            break;
        }
        let u: f64 = rng.sample(Open01);
        let dt = -u.ln() / a0;
        if t + dt > horizon {
            break;
        }
        let target = rng.random::<f64>() * a0;
        let mut acc = 0.0;
        // falls back to the last enabled reaction if rounding leaves target >= sum
        let mut chosen = props.iter().rposition(|&p| p > 0.0).unwrap_or(0);
        for (i, &p) in props.iter().enumerate() {
            acc += p;
            if target < acc {
                chosen = i;
                break;
            }
        }
        // zero-propensity reactions are never chosen, so counts stay nonnegative
        for (xj, &d) in x.iter_mut().zip(&updates[chosen]) {
            *xj = (*xj as i64 + d) as u64;
        }
        let t_next = t + dt;
        if t_next <= t {
            // holding time below float resolution: merge into the current instant
            let k = times.len() - 1;
            states[k * n..].copy_from_slice(&x);
            continue;
        }
        t = t_next;
        times.push(t);
        states.extend_from_slice(&x);
    }
    Ok(Trajectory { times, states, n_species: n, horizon })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pctmc::{sir_model, validate_model, ParamSpace, RateLaw, Reaction};
    use crate::rng::{child_rng, rng_from_seed};
    use proptest::prelude::*;
    use statrs::distribution::{ChiSquared, ContinuousCDF, Discrete, DiscreteCDF, Poisson};

    fn pure_birth(k: f64) -> (PctmcModel, f64) {
        let m = PctmcModel {
            species: vec!["S".into()],
            init_state: vec![0],
            reactions: vec![Reaction {
                label: "birth".into(),
                reactants: vec![0],
                products: vec![1],
                rate_law: RateLaw::MassAction,
                param_index: 0,
                rate_factors: None,
            }],
            param_names: vec![],
            param_space: ParamSpace::new(vec![[0.0, 10.0]]),
            population_size_constant: None,
        };
        (m, k)
    }

    fn final_counts(runs: u64) -> Vec<u64> {
        let (m, k) = pure_birth(1.0);
        (0..runs)
            .map(|r| {
                let mut rng = child_rng(7, &[r]);
                ssa_simulate(&m, &[k], 10.0, &mut rng).unwrap().final_state()[0]
            })
            .collect()
    }

    #[test]
    fn pure_birth_mean_matches_poisson() {
        let c = final_counts(10_000);
        let mean = c.iter().sum::<u64>() as f64 / c.len() as f64;
        assert!((mean - 10.0).abs() < 3.0 * (10.0f64 / 10_000.0).sqrt(), "mean {mean}");
    }

    #[test]
    fn pure_birth_chi_square_fit() {
        let c = final_counts(10_000);
        let pois = Poisson::new(10.0).unwrap();
        let n = c.len() as f64;
        // bins {<=4}, 5..=16, {>=17}: every expected count is well above 5
        let bin = |x: u64| x.clamp(4, 17) as usize - 4;
        let mut obs = [0.0f64; 14];
        for &x in &c {
            obs[bin(x)] += 1.0;
        }
        let mut exp = [0.0f64; 14];
        exp[0] = pois.cdf(4);
        for x in 5..17u64 {
            exp[x as usize - 4] = pois.pmf(x);
        }
        exp[13] = 1.0 - pois.cdf(16);
        let stat: f64 = obs.iter().zip(&exp).map(|(o, e)| (o - n * e).powi(2) / (n * e)).sum();
        let crit = ChiSquared::new(13.0).unwrap().inverse_cdf(0.99);
        assert!(stat < crit, "chi2 {stat} >= {crit}");
    }

    #[test]
    fn sir_without_infected_is_absorbing() {
        let mut m = sir_model();
        m.init_state = vec![100, 0, 0];
        let tr = ssa_simulate(&m, &[0.1, 0.05], 120.0, &mut rng_from_seed(1)).unwrap();
        assert_eq!(tr.len(), 1);
        assert_eq!(tr.final_state(), &[100, 0, 0]);
    }

    #[test]
    fn same_seed_same_trajectory() {
        let m = sir_model();
        let a = ssa_simulate(&m, &[0.1, 0.05], 120.0, &mut rng_from_seed(3)).unwrap();
        let b = ssa_simulate(&m, &[0.1, 0.05], 120.0, &mut rng_from_seed(3)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn nonpositive_horizon_is_rejected() {
        let m = sir_model();
        assert!(ssa_simulate(&m, &[0.1, 0.05], 0.0, &mut rng_from_seed(3)).is_err());
        assert!(ssa_simulate(&m, &[0.1, 0.05], -1.0, &mut rng_from_seed(3)).is_err());
    }

    #[test]
    fn state_at_follows_jumps() {
        let tr = Trajectory { times: vec![0.0, 1.0, 2.5], states: vec![1, 2, 3], n_species: 1, horizon: 4.0 };
        assert_eq!(tr.state_at(0.0), &[1]);
        assert_eq!(tr.state_at(0.99), &[1]);
        assert_eq!(tr.state_at(1.0), &[2]);
        assert_eq!(tr.state_at(4.0), &[3]);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn jumps_are_single_reactions(seed in any::<u64>(), beta in 0.005f64..0.3, gamma in 0.005f64..0.2) {
            let m = sir_model();
            let tr = ssa_simulate(&m, &[beta, gamma], 120.0, &mut rng_from_seed(seed)).unwrap();
            let nus: Vec<Vec<i64>> = m.reactions.iter().map(|r| r.update_vector()).collect();
            prop_assert_eq!(tr.times[0], 0.0);
            prop_assert!(*tr.times.last().unwrap() <= 120.0);
            for k in 1..tr.len() {
                prop_assert!(tr.times[k] > tr.times[k - 1]);
                let d: Vec<i64> = tr.state(k).iter().zip(tr.state(k - 1)).map(|(&a, &b)| a as i64 - b as i64).collect();
                prop_assert!(nus.contains(&d), "jump {:?}", d);
            }
        }

        #[test]
        fn propensities_are_nonnegative(s in 0u64..50, i in 0u64..50, r in 0u64..50, beta in 0.0f64..1.0, gamma in 0.0f64..1.0) {
            let m = sir_model();
            prop_assert!(validate_model(&m).is_empty());
            for idx in 0..2 {
                let a = crate::pctmc::propensity(&m, &[s, i, r], &[beta, gamma], idx).unwrap();
                prop_assert!(a >= 0.0);
                let short = m.reactions[idx].reactants.iter().zip([s, i, r]).any(|(&al, x)| x < u64::from(al));
                if short { prop_assert_eq!(a, 0.0); }
            }
        }
    }
}
