use rayon::prelude::*;

use super::{DataPoint, Dataset, DatasetMeta, Role, Scaling};
use crate::error::{Error, Result};
use crate::pctmc::{ssa_simulate, validate_model, PctmcModel};
use crate::rng::child_rng;
use crate::stl::{CompiledFormula, StlFormula};

/// Simulates `m` runs at every `theta` and counts how many satisfy
/// `formula`. Point `i` draws from the stream `(seed, i)`, so the result
/// does not depend on the number of worker threads.
pub fn generate_dataset(
    model: &PctmcModel,
    formula: &StlFormula,
    thetas: &[Vec<f64>],
    m: u32,
    horizon: f64,
    role: Role,
    seed: u64,
) -> Result<Dataset> {
    if m == 0 {
        return Err(Error::InvalidArgument("need at least one trajectory per point".into()));
    }
    let violations = validate_model(model);
    if !violations.is_empty() {
        return Err(Error::InvalidModel(violations));
    }
    let compiled = CompiledFormula::new(formula, &model.species)?;
    if compiled.horizon() > horizon {
        return Err(Error::HorizonTooShort { required: compiled.horizon(), available: horizon });
    }
    if let Some(bad) = thetas.iter().find(|t| !model.param_space.contains(t)) {
        return Err(Error::InvalidArgument(format!("parameter {bad:?} lies outside the parameter space")));
    }
    let points = thetas
        .par_iter()
        .enumerate()
        .map(|(i, theta)| {
            let mut rng = child_rng(seed, &[i as u64]);
            let mut successes = 0;
            for _ in 0..m {
                let tr = ssa_simulate(model, theta, horizon, &mut rng)?;
                successes += u32::from(compiled.check(&tr)?);
            }
            Ok(DataPoint { theta: theta.clone(), successes, trials: m })
        })
        .collect::<Result<Vec<_>>>()?;
    let meta = DatasetMeta { seed: Some(seed), model_hash: None, formula: Some(formula.to_string()), horizon: Some(horizon) };
    Ok(Dataset::new(role, points, Scaling::from_space(&model.param_space))?.with_meta(meta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{sample_parameters, SamplingStrategy};
    use crate::pctmc::sir_model;
    use crate::rng::rng_from_seed;
    use crate::stl::parse_stl;

    fn thetas(n: usize) -> Vec<Vec<f64>> {
        let m = sir_model();
        sample_parameters(&m.param_space, n, SamplingStrategy::UniformRandom, &mut rng_from_seed(1)).unwrap()
    }

    #[test]
    fn tautology_and_contradiction() {
        let m = sir_model();
        let t = thetas(20);
        let yes = generate_dataset(&m, &StlFormula::True, &t, 7, 10.0, Role::Train, 3).unwrap();
        assert!(yes.points.iter().all(|p| p.successes == 7 && p.trials == 7));
        let no = generate_dataset(&m, &parse_stl("false").unwrap(), &t, 7, 10.0, Role::Train, 3).unwrap();
        assert!(no.points.iter().all(|p| p.successes == 0));
    }

    #[test]
    fn analytic_frequencies_over_regenerations() {
        let m = sir_model();
        let t = thetas(1);
        let (mut yes, mut no) = (0.0, 0.0);
        for s in 0..200 {
            yes += generate_dataset(&m, &StlFormula::True, &t, 3, 5.0, Role::Test, s).unwrap().means()[0];
            no += generate_dataset(&m, &parse_stl("false").unwrap(), &t, 3, 5.0, Role::Test, s).unwrap().means()[0];
        }
        assert_eq!(yes / 200.0, 1.0);
        assert_eq!(no / 200.0, 0.0);
    }

    #[test]
    fn reproducible_and_seed_sensitive() {
        let m = sir_model();
        let f = parse_stl("(I > 0) U[100,120] (I == 0)").unwrap();
        let t = thetas(10);
        let a = generate_dataset(&m, &f, &t, 20, 120.0, Role::Train, 42).unwrap();
        let b = generate_dataset(&m, &f, &t, 20, 120.0, Role::Train, 42).unwrap();
        let c = generate_dataset(&m, &f, &t, 20, 120.0, Role::Train, 43).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.points, c.points);
    }

    #[test]
    fn precondition_failures() {
        let m = sir_model();
        let f = parse_stl("(I > 0) U[100,120] (I == 0)").unwrap();
        let t = thetas(2);
        assert!(matches!(
            generate_dataset(&m, &f, &t, 5, 50.0, Role::Train, 0),
            Err(Error::HorizonTooShort { .. })
        ));
        assert!(generate_dataset(&m, &f, &t, 0, 120.0, Role::Train, 0).is_err());
        assert!(generate_dataset(&m, &f, &[vec![1.0, 1.0]], 5, 120.0, Role::Train, 0).is_err());
        let q = parse_stl("Q > 1").unwrap();
        assert!(matches!(generate_dataset(&m, &q, &t, 5, 120.0, Role::Train, 0), Err(Error::UnboundIdentifier(_))));
    }
}
