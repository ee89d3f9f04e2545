use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pctmc::ParamSpace;

/// How parameter vectors are placed in the box.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SamplingStrategy {
    /// Cartesian grid, endpoints included, over the non-degenerate
    /// dimensions. `N` must be a perfect power of their number.
    UniformGrid,
    UniformRandom,
    /// `exp(U(log lo, log hi))` per dimension.
    LogRandom,
}

impl std::str::FromStr for SamplingStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform-grid" | "grid" => Ok(Self::UniformGrid),
            "uniform-random" | "random" => Ok(Self::UniformRandom),
            "log-random" => Ok(Self::LogRandom),
            _ => Err(Error::InvalidArgument(format!("unknown sampling strategy `{s}`"))),
        }
    }
}

fn grid_side(n: usize, k: u32) -> Option<usize> {
    let g = (n as f64).powf(1.0 / f64::from(k)).round() as usize;
    (g.max(1).checked_pow(k) == Some(n)).then_some(g.max(1))
}

/// Draws `n` parameter vectors from `space`.
pub fn sample_parameters<R: Rng + ?Sized>(
    space: &ParamSpace,
    n: usize,
    strategy: SamplingStrategy,
    rng: &mut R,
) -> Result<Vec<Vec<f64>>> {
    if n == 0 {
        return Err(Error::InvalidArgument("need at least one parameter point".into()));
    }
    let b = &space.bounds;
    match strategy {
        SamplingStrategy::UniformRandom => Ok((0..n)
            .map(|_| b.iter().map(|&[lo, hi]| if hi > lo { rng.random_range(lo..=hi) } else { lo }).collect())
            .collect()),
        SamplingStrategy::LogRandom => {
            if let Some(j) = b.iter().position(|&[lo, _]| lo <= 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "log-random sampling needs positive bounds, dimension {j} starts at {}",
                    b[j][0]
                )));
            }
            Ok((0..n)
                .map(|_| {
                    b.iter()
                        .map(|&[lo, hi]| if hi > lo { rng.random_range(lo.ln()..=hi.ln()).exp() } else { lo })
                        .collect()
                })
                .collect())
        }
        SamplingStrategy::UniformGrid => {
            let free: Vec<usize> = (0..b.len()).filter(|&j| b[j][1] > b[j][0]).collect();
            if free.is_empty() {
                return Ok(vec![b.iter().map(|x| x[0]).collect(); n]);
            }
            let g = grid_side(n, free.len() as u32).ok_or_else(|| {
                Error::InvalidArgument(format!("a grid over {} dimensions cannot have {n} points", free.len()))
            })?;
            let axis = |j: usize, i: usize| {
                let [lo, hi] = b[j];
                if g == 1 {
                    0.5 * (lo + hi)
                } else {
                    lo + (hi - lo) * i as f64 / (g - 1) as f64
                }
            };
            Ok((0..n)
                .map(|mut idx| {
                    let mut theta: Vec<f64> = b.iter().map(|x| x[0]).collect();
                    // last free dimension varies fastest
                    for &j in free.iter().rev() {
                        theta[j] = axis(j, idx % g);
                        idx /= g;
                    }
                    theta
                })
                .collect())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;

    #[test]
    fn degenerate_box() {
        let s = ParamSpace::new(vec![[1.0, 1.0]]);
        for strat in [SamplingStrategy::UniformGrid, SamplingStrategy::UniformRandom, SamplingStrategy::LogRandom] {
            let t = sample_parameters(&s, 5, strat, &mut rng_from_seed(0)).unwrap();
            assert_eq!(t, vec![vec![1.0]; 5]);
        }
    }

    #[test]
    fn grid_includes_endpoints() {
        let s = ParamSpace::new(vec![[0.0, 1.0]]);
        let t = sample_parameters(&s, 3, SamplingStrategy::UniformGrid, &mut rng_from_seed(0)).unwrap();
        assert_eq!(t, vec![vec![0.0], vec![0.5], vec![1.0]]);
        let two = ParamSpace::new(vec![[0.0, 1.0], [2.0, 2.0], [0.0, 2.0]]);
        let t = sample_parameters(&two, 9, SamplingStrategy::UniformGrid, &mut rng_from_seed(0)).unwrap();
        assert_eq!(t[0], vec![0.0, 2.0, 0.0]);
        assert_eq!(t[1], vec![0.0, 2.0, 1.0]);
        assert_eq!(t[8], vec![1.0, 2.0, 2.0]);
        assert!(sample_parameters(&two, 10, SamplingStrategy::UniformGrid, &mut rng_from_seed(0)).is_err());
    }

    #[test]
    fn log_random_median() {
        let s = ParamSpace::new(vec![[0.001, 1.0]]);
        let n = 100_000;
        let mut t: Vec<f64> = sample_parameters(&s, n, SamplingStrategy::LogRandom, &mut rng_from_seed(5))
            .unwrap()
            .into_iter()
            .map(|v| v[0])
            .collect();
        t.sort_by(f64::total_cmp);
        let median = t[n / 2];
        // the sample median's CDF value is approximately N(1/2, 1/(4n))
        let u = (median.ln() - 0.001f64.ln()) / (1.0f64.ln() - 0.001f64.ln());
        let sigma = (0.25 / n as f64).sqrt();
        assert!((u - 0.5).abs() < 3.0 * sigma, "median {median}");
        assert!((median - 0.001f64.sqrt()).abs() < 0.002);
    }

    #[test]
    fn log_random_rejects_nonpositive_bounds() {
        let s = ParamSpace::new(vec![[0.0, 1.0]]);
        assert!(sample_parameters(&s, 3, SamplingStrategy::LogRandom, &mut rng_from_seed(0)).is_err());
    }

    #[test]
    fn deterministic_per_seed() {
        let s = ParamSpace::new(vec![[0.005, 0.3], [0.005, 0.2]]);
        let a = sample_parameters(&s, 50, SamplingStrategy::UniformRandom, &mut rng_from_seed(9)).unwrap();
        let b = sample_parameters(&s, 50, SamplingStrategy::UniformRandom, &mut rng_from_seed(9)).unwrap();
        assert_eq!(a, b);
        assert!(a.iter().all(|t| s.contains(t)));
    }
}
