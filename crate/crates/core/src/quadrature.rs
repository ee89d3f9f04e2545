//! Gauss–Hermite quadrature for Gaussian expectations.

use serde::{Deserialize, Serialize};

/// Nodes and weights for `∫ e^{-x²} h(x) dx ≈ Σ w_i h(x_i)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussHermite {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussHermite {
    /// Rule with `n` nodes, found by Newton iteration on the orthonormal
    /// Hermite recurrence.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Hermite rule needs at least one node");
        let pim4 = std::f64::consts::PI.powf(-0.25);
        let mut x = vec![0.0; n];
        let mut w = vec![0.0; n];
        let m = n.div_ceil(2);
        let nf = n as f64;
        let mut z = 0.0f64;
        for i in 0..m {
            z = match i {
                0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-1.0 / 6.0),
                1 => z - 1.14 * nf.powf(0.426) / z,
                2 => 1.86 * z - 0.86 * x[0],
                3 => 1.91 * z - 0.91 * x[1],
                _ => 2.0 * z - x[i - 2],
            };
            let mut pp = 0.0;
            for _ in 0..100 {
                let mut p1 = pim4;
                let mut p2 = 0.0;
                for j in 0..n {
                    let p3 = p2;
                    p2 = p1;
                    let jf = j as f64;
                    p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
                }
                pp = (2.0 * nf).sqrt() * p2;
                let z1 = z;
                z = z1 - p1 / pp;
                if (z - z1).abs() <= 1e-15 * z.abs().max(1.0) {
                    break;
                }
            }
            x[i] = z;
            x[n - 1 - i] = -z;
            w[i] = 2.0 / (pp * pp);
            w[n - 1 - i] = w[i];
        }
        if n % 2 == 1 {
            x[n / 2] = 0.0;
        }
        // ascending order
        x.reverse();
        w.reverse();
        Self { nodes: x, weights: w }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `E[h(g)]` for `g ~ N(mean, var)`.
    pub fn expect(&self, mean: f64, var: f64, mut h: impl FnMut(f64) -> f64) -> f64 {
        let s = (2.0 * var.max(0.0)).sqrt();
        let total: f64 = self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * h(mean + s * x)).sum();
        total / std::f64::consts::PI.sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_sum_to_sqrt_pi() {
        for n in [1, 2, 5, 20, 40] {
            let q = GaussHermite::new(n);
            let s: f64 = q.weights.iter().sum();
            assert!((s - std::f64::consts::PI.sqrt()).abs() < 1e-12, "n={n}");
        }
    }

    #[test]
    fn known_small_rules() {
        let q = GaussHermite::new(2);
        assert!((q.nodes[1] - 0.5f64.sqrt()).abs() < 1e-14);
        let q3 = GaussHermite::new(3);
        assert!((q3.nodes[2] - 1.5f64.sqrt()).abs() < 1e-14);
        assert!((q3.weights[1] - 2.0 * std::f64::consts::PI.sqrt() / 3.0).abs() < 1e-14);
    }

    #[test]
    fn gaussian_moments_exact() {
        let q = GaussHermite::new(20);
        let (mu, var) = (0.7, 2.3);
        assert!((q.expect(mu, var, |g| g) - mu).abs() < 1e-12);
        assert!((q.expect(mu, var, |g| (g - mu).powi(2)) - var).abs() < 1e-12);
        assert!((q.expect(mu, var, |g| (g - mu).powi(4)) - 3.0 * var * var).abs() < 1e-10);
        // E[exp(g)] = exp(mu + var/2)
        let e = q.expect(0.1, 0.25, f64::exp);
        assert!((e - (0.1f64 + 0.125).exp()).abs() < 1e-13);
    }

    #[test]
    fn nodes_are_sorted_and_symmetric() {
        let q = GaussHermite::new(21);
        assert!(q.nodes.windows(2).all(|w| w[0] < w[1]));
        for i in 0..21 {
            assert!((q.nodes[i] + q.nodes[20 - i]).abs() < 1e-13);
        }
    }
}
