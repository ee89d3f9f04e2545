use faer::linalg::matmul::matmul;
use faer::{Accum, Mat, MatMut, MatRef, Par};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::likelihood::{binomial_loglik, sigmoid, Link, PROB_FLOOR};

/// Fully connected network `d -> widths... -> 1` with LeakyReLU hidden
/// units and a logistic output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BnnArchitecture {
    pub input_dim: usize,
    pub hidden_widths: Vec<usize>,
    pub leaky_slope: f64,
}

/// Offsets of one dense layer inside the flat weight vector. Weights are
/// stored row-major as `out × in`, followed by `out` biases.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerShape {
    pub fan_in: usize,
    pub fan_out: usize,
    pub weights: usize,
    pub biases: usize,
}

impl LayerShape {
    pub fn end(&self) -> usize {
        self.biases + self.fan_out
    }
}

impl BnnArchitecture {
    pub fn new(input_dim: usize, hidden_widths: Vec<usize>) -> Self {
        Self { input_dim, hidden_widths, leaky_slope: 0.01 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.hidden_widths.contains(&0) {
            return Err(Error::InvalidArgument("layer widths must be at least 1".into()));
        }
        Ok(())
    }

    pub fn layers(&self) -> Vec<LayerShape> {
        let mut dims = vec![self.input_dim];
        dims.extend(&self.hidden_widths);
        dims.push(1);
        let mut off = 0;
        dims.windows(2)
            .map(|w| {
                let l = LayerShape { fan_in: w[0], fan_out: w[1], weights: off, biases: off + w[0] * w[1] };
                off = l.end();
                l
            })
            .collect()
    }

    pub fn n_params(&self) -> usize {
        self.layers().last().map_or(0, LayerShape::end)
    }

    fn check(&self, w: &[f64], d: usize) -> Result<()> {
        if w.len() != self.n_params() {
            return Err(Error::DimensionMismatch { expected: self.n_params(), actual: w.len() });
        }
        if d != self.input_dim {
            return Err(Error::DimensionMismatch { expected: self.input_dim, actual: d });
        }
        Ok(())
    }

    fn leaky(&self, z: f64) -> f64 {
        if z >= 0.0 {
            z
        } else {
            self.leaky_slope * z
        }
    }
}

fn weight_view<'a>(w: &'a [f64], l: &LayerShape) -> MatRef<'a, f64> {
    MatRef::from_row_major_slice(&w[l.weights..l.biases], l.fan_out, l.fan_in)
}

/// Pre-activations of every layer for a batch `x` (`b × d`).
fn forward_batch(arch: &BnnArchitecture, w: &[f64], x: MatRef<'_, f64>) -> Vec<Mat<f64>> {
    let layers = arch.layers();
    let mut pre: Vec<Mat<f64>> = Vec::with_capacity(layers.len());
    let mut act = x.to_owned();
    for (k, l) in layers.iter().enumerate() {
        let mut z = Mat::from_fn(x.nrows(), l.fan_out, |_, o| w[l.biases + o]);
        matmul(z.as_mut(), Accum::Add, act.as_ref(), weight_view(w, l).transpose(), 1.0, Par::Seq);
        if k + 1 < layers.len() {
            act = Mat::from_fn(z.nrows(), z.ncols(), |i, j| arch.leaky(z[(i, j)]));
        }
        pre.push(z);
    }
    pre
}

/// Output logits `a` with `f = sigmoid(a)` for each row of `x`.
pub fn forward_logits(arch: &BnnArchitecture, w: &[f64], x: MatRef<'_, f64>) -> Result<Vec<f64>> {
    arch.check(w, x.ncols())?;
    let pre = forward_batch(arch, w, x);
    let out = pre.last().expect("network has an output layer");
    Ok((0..x.nrows()).map(|i| out[(i, 0)]).collect())
}

/// Network output at one scaled input, clipped to `[1e-12, 1 - 1e-12]`.
pub fn forward(arch: &BnnArchitecture, w: &[f64], theta: &[f64]) -> Result<f64> {
    let x = MatRef::from_row_major_slice(theta, 1, theta.len());
    let a = forward_logits(arch, w, x)?[0];
    Ok(sigmoid(a).clamp(PROB_FLOOR, 1.0 - PROB_FLOOR))
}

/// `Σ_i log Binomial(k_i | n_i, f_w(x_i))` and its gradient in `w`,
/// accumulated into `grad` after multiplying by `scale`.
pub(crate) fn loglik_grad(
    arch: &BnnArchitecture,
    w: &[f64],
    x: MatRef<'_, f64>,
    successes: &[u32],
    trials: &[u32],
    scale: f64,
    grad: &mut [f64],
) -> f64 {
    let layers = arch.layers();
    let pre = forward_batch(arch, w, x);
    let b = x.nrows();
    let out = pre.last().expect("network has an output layer");
    let mut total = 0.0;
    let mut delta = Mat::zeros(b, 1);
    for i in 0..b {
        let (l, d) = binomial_loglik(out[(i, 0)], successes[i], trials[i], Link::Logit);
        total += l;
        delta[(i, 0)] = scale * d;
    }
    for k in (0..layers.len()).rev() {
        let l = &layers[k];
        let input = if k == 0 {
            x.to_owned()
        } else {
            let z = &pre[k - 1];
            Mat::from_fn(b, l.fan_in, |i, j| arch.leaky(z[(i, j)]))
        };
        let gw = MatMut::from_row_major_slice_mut(&mut grad[l.weights..l.biases], l.fan_out, l.fan_in);
        matmul(gw, Accum::Add, delta.transpose(), input.as_ref(), 1.0, Par::Seq);
        for o in 0..l.fan_out {
            grad[l.biases + o] += (0..b).map(|i| delta[(i, o)]).sum::<f64>();
        }
        if k > 0 {
            let mut back = Mat::zeros(b, l.fan_in);
            matmul(back.as_mut(), Accum::Replace, delta.as_ref(), weight_view(w, l), 1.0, Par::Seq);
            let z = &pre[k - 1];
            delta = Mat::from_fn(b, l.fan_in, |i, j| if z[(i, j)] >= 0.0 { back[(i, j)] } else { arch.leaky_slope * back[(i, j)] });
        }
    }
    total
}
