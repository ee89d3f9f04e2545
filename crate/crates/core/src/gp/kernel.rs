use faer::{Mat, MatRef};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Squared-exponential kernel with one lengthscale per input dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RbfKernel {
    pub log_lengthscale: Vec<f64>,
    pub log_variance: f64,
}

impl RbfKernel {
    pub fn new(lengthscale: &[f64], variance: f64) -> Self {
        Self { log_lengthscale: lengthscale.iter().map(|l| l.ln()).collect(), log_variance: variance.ln() }
    }

    pub fn dim(&self) -> usize {
        self.log_lengthscale.len()
    }

    pub fn variance(&self) -> f64 {
        self.log_variance.exp()
    }

    pub(crate) fn inv_sq_lengthscales(&self) -> Vec<f64> {
        self.log_lengthscale.iter().map(|l| (-2.0 * l).exp()).collect()
    }

    #[inline]
    pub(crate) fn eval_with(&self, var: f64, inv_l2: &[f64], x: &[f64], y: &[f64]) -> f64 {
        let mut r2 = 0.0;
        for k in 0..inv_l2.len() {
            let d = x[k] - y[k];
            r2 += d * d * inv_l2[k];
        }
        var * (-0.5 * r2).exp()
    }

    pub fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        self.eval_with(self.variance(), &self.inv_sq_lengthscales(), x, y)
    }
}

fn row(m: MatRef<'_, f64>, i: usize) -> Vec<f64> {
    (0..m.ncols()).map(|k| m[(i, k)]).collect()
}

/// `K(X, Y)` without jitter. Rows of `x` and `y` are points.
pub fn kernel_matrix(kernel: &RbfKernel, x: MatRef<'_, f64>, y: MatRef<'_, f64>) -> Result<Mat<f64>> {
    if x.ncols() != kernel.dim() || y.ncols() != kernel.dim() {
        return Err(Error::DimensionMismatch { expected: kernel.dim(), actual: x.ncols().max(y.ncols()) });
    }
    let var = kernel.variance();
    let il = kernel.inv_sq_lengthscales();
    let ys: Vec<Vec<f64>> = (0..y.nrows()).map(|j| row(y, j)).collect();
    let mut out = Mat::zeros(x.nrows(), y.nrows());
    for i in 0..x.nrows() {
        let xi = row(x, i);
        for (j, yj) in ys.iter().enumerate() {
            out[(i, j)] = kernel.eval_with(var, &il, &xi, yj);
        }
    }
    Ok(out)
}

/// `K(X, X) + jitter·I`.
pub fn gram(kernel: &RbfKernel, x: MatRef<'_, f64>, jitter: f64) -> Result<Mat<f64>> {
    if x.ncols() != kernel.dim() {
        return Err(Error::DimensionMismatch { expected: kernel.dim(), actual: x.ncols() });
    }
    let var = kernel.variance();
    let il = kernel.inv_sq_lengthscales();
    let xs: Vec<Vec<f64>> = (0..x.nrows()).map(|i| row(x, i)).collect();
    let n = x.nrows();
    let mut k = Mat::zeros(n, n);
    for i in 0..n {
        for j in 0..i {
            let v = kernel.eval_with(var, &il, &xs[i], &xs[j]);
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
        k[(i, i)] = var + jitter;
    }
    Ok(k)
}

/// Gradient of `Σ_{ij} W_ij K(Z, X)_ij` with respect to `Z`, the log
/// lengthscales and the log variance, accumulated into the outputs.
/// `k` must hold `K(Z, X)`.
pub(crate) fn accumulate_cross_grad(
    kernel: &RbfKernel,
    z: MatRef<'_, f64>,
    x: MatRef<'_, f64>,
    k: MatRef<'_, f64>,
    w: MatRef<'_, f64>,
    z_bar: &mut Mat<f64>,
    log_l_bar: &mut [f64],
    log_var_bar: &mut f64,
) {
    let il = kernel.inv_sq_lengthscales();
    let d = kernel.dim();
    for j in 0..z.nrows() {
        for i in 0..x.nrows() {
            let wk = w[(j, i)] * k[(j, i)];
            if wk == 0.0 {
                continue;
            }
            *log_var_bar += wk;
            for c in 0..d {
                let diff = z[(j, c)] - x[(i, c)];
                z_bar[(j, c)] -= wk * diff * il[c];
                log_l_bar[c] += wk * diff * diff * il[c];
            }
        }
    }
}

/// Same for `K(Z, Z) + jitter_rel·σ²·I` with a symmetric weight matrix `W`.
/// `k` must hold the jittered Gram matrix.
pub(crate) fn accumulate_gram_grad(
    kernel: &RbfKernel,
    z: MatRef<'_, f64>,
    k: MatRef<'_, f64>,
    w: MatRef<'_, f64>,
    z_bar: &mut Mat<f64>,
    log_l_bar: &mut [f64],
    log_var_bar: &mut f64,
) {
    let il = kernel.inv_sq_lengthscales();
    let d = kernel.dim();
    let m = z.nrows();
    for j in 0..m {
        // the jitter scales with σ², so the diagonal feeds the variance too
        *log_var_bar += w[(j, j)] * k[(j, j)];
        for l in 0..j {
            let wk = 2.0 * w[(j, l)] * k[(j, l)];
            *log_var_bar += wk;
            for c in 0..d {
                let diff = z[(j, c)] - z[(l, c)];
                let g = wk * diff * il[c];
                z_bar[(j, c)] -= g;
                z_bar[(l, c)] += g;
                log_l_bar[c] += wk * diff * diff * il[c];
            }
        }
    }
}
