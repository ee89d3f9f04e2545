use faer::{Mat, MatRef};
use serde::{Deserialize, Serialize};

use super::kernel::{gram, kernel_matrix, RbfKernel};
use super::linalg::{cholesky, col_sq, mul_tri, solve_l};
use faer::linalg::matmul::triangular::BlockStructure::{Rectangular, TriangularUpper};
pub use crate::dataset::Observations;
use crate::error::{Error, Result};
use crate::likelihood::{expected_log_lik, Link};
use crate::quadrature::GaussHermite;

/// Variational distribution `q(u) = N(η, S Sᵀ)` over the latent values at
/// the inducing inputs `Z`, together with the kernel it is paired with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpVariationalState {
    /// Inducing inputs, one row per point, in scaled coordinates.
    pub z: Vec<Vec<f64>>,
    pub eta: Vec<f64>,
    /// Lower-triangular factor, stored by rows.
    pub s: Vec<Vec<f64>>,
    pub kernel: RbfKernel,
    /// Diagonal jitter relative to the kernel variance.
    pub jitter_rel: f64,
}

pub(crate) fn rows_to_mat(rows: &[Vec<f64>], ncols: usize) -> Mat<f64> {
    Mat::from_fn(rows.len(), ncols, |i, j| rows[i][j])
}

pub(crate) fn mat_to_rows(m: MatRef<'_, f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect()
}

impl GpVariationalState {
    /// `q(u)` equal to the prior: `η = 0`, `S = chol(K_mm)`.
    pub fn prior(z: Vec<Vec<f64>>, kernel: RbfKernel, jitter_rel: f64) -> Result<Self> {
        let m = z.len();
        let zm = rows_to_mat(&z, kernel.dim());
        let l = cholesky(gram(&kernel, zm.as_ref(), jitter_rel * kernel.variance())?.as_ref())?;
        let state = Self { z, eta: vec![0.0; m], s: mat_to_rows(l.as_ref()), kernel, jitter_rel };
        state.validate()?;
        Ok(state)
    }

    pub fn m(&self) -> usize {
        self.z.len()
    }

    pub fn jitter(&self) -> f64 {
        self.jitter_rel * self.kernel.variance()
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.m();
        let d = self.kernel.dim();
        if m == 0 {
            return Err(Error::InvalidArgument("need at least one inducing point".into()));
        }
        if let Some(r) = self.z.iter().find(|r| r.len() != d) {
            return Err(Error::DimensionMismatch { expected: d, actual: r.len() });
        }
        if self.eta.len() != m {
            return Err(Error::DimensionMismatch { expected: m, actual: self.eta.len() });
        }
        if self.s.len() != m || self.s.iter().any(|r| r.len() != m) {
            return Err(Error::DimensionMismatch { expected: m, actual: self.s.len() });
        }
        for (i, row) in self.s.iter().enumerate() {
            if !(row[i] > 0.0) {
                return Err(Error::InvalidArgument(format!("S diagonal entry {i} is not positive")));
            }
            if row[i + 1..].iter().any(|&x| x != 0.0) {
                return Err(Error::InvalidArgument("S must be lower triangular".into()));
            }
        }
        if !(self.jitter_rel >= 0.0) {
            return Err(Error::InvalidArgument("jitter must be nonnegative".into()));
        }
        Ok(())
    }

    pub(crate) fn z_mat(&self) -> Mat<f64> {
        rows_to_mat(&self.z, self.kernel.dim())
    }

    pub(crate) fn s_mat(&self) -> Mat<f64> {
        rows_to_mat(&self.s, self.m())
    }

    /// `K_mm + jitter·I`.
    pub fn kmm(&self) -> Result<Mat<f64>> {
        gram(&self.kernel, self.z_mat().as_ref(), self.jitter())
    }

    /// `(L, L⁻¹η, L⁻¹S)` with `L = chol(K_mm)`.
    pub(crate) fn whiten(&self) -> Result<(Mat<f64>, Vec<f64>, Mat<f64>)> {
        let l = cholesky(self.kmm()?.as_ref())?;
        let eta = Mat::from_fn(self.m(), 1, |i, _| self.eta[i]);
        let v = solve_l(l.as_ref(), eta.as_ref());
        let r = solve_l(l.as_ref(), self.s_mat().as_ref());
        Ok((l, (0..self.m()).map(|i| v[(i, 0)]).collect(), r))
    }
}

/// Whitened marginals: `C = L⁻¹K_mx`, mean `Cᵀv`,
/// variance `k_xx + jitter − |C|² + |RᵀC|²` column-wise.
pub(crate) fn whitened_marginals(
    kernel: &RbfKernel,
    z: MatRef<'_, f64>,
    l: MatRef<'_, f64>,
    jitter: f64,
    v: &[f64],
    r: MatRef<'_, f64>,
    x: MatRef<'_, f64>,
) -> Result<(Vec<f64>, Vec<f64>, Mat<f64>, Mat<f64>)> {
    let kmx = kernel_matrix(kernel, z, x)?;
    let c = solve_l(l, kmx.as_ref());
    let rc = mul_tri(r.transpose(), TriangularUpper, c.as_ref(), Rectangular, Rectangular);
    let m = l.nrows();
    let n = x.nrows();
    let kxx = kernel.variance() + jitter;
    let cc = col_sq(c.as_ref());
    let rr = col_sq(rc.as_ref());
    let mean = (0..n).map(|i| (0..m).map(|j| c[(j, i)] * v[j]).sum()).collect();
    let var = (0..n).map(|i| kxx - cc[i] + rr[i]).collect();
    Ok((mean, var, kmx, c))
}

/// Mean and variance of `q(g(x))` at scaled inputs `x`.
pub fn q_g_marginals(state: &GpVariationalState, x: &[Vec<f64>]) -> Result<(Vec<f64>, Vec<f64>)> {
    state.validate()?;
    let (l, v, r) = state.whiten()?;
    if let Some(p) = x.iter().find(|p| p.len() != state.kernel.dim()) {
        return Err(Error::DimensionMismatch { expected: state.kernel.dim(), actual: p.len() });
    }
    let xm = rows_to_mat(x, state.kernel.dim());
    let (mean, var, _, _) =
        whitened_marginals(&state.kernel, state.z_mat().as_ref(), l.as_ref(), state.jitter(), &v, r.as_ref(), xm.as_ref())?;
    Ok((mean, var.into_iter().map(|s| s.max(f64::MIN_POSITIVE)).collect()))
}

/// `KL[N(v, RRᵀ) ‖ N(0, I)]`, equal to `KL[q(u) ‖ p(u)]`.
pub(crate) fn whitened_kl(v: &[f64], r: MatRef<'_, f64>) -> f64 {
    let m = v.len();
    let mut t = v.iter().map(|x| x * x).sum::<f64>() - m as f64;
    for j in 0..m {
        for i in j..m {
            t += r[(i, j)] * r[(i, j)];
        }
        t -= 2.0 * r[(j, j)].abs().ln();
    }
    0.5 * t
}

/// `KL[N(η, SSᵀ) ‖ N(0, K_mm)]`.
pub fn kl_divergence(state: &GpVariationalState) -> Result<f64> {
    state.validate()?;
    let (_, v, r) = state.whiten()?;
    Ok(whitened_kl(&v, r.as_ref()))
}

/// `KL[q(g_X) ‖ π(g_X)]` between the full joint Gaussians at scaled inputs
/// `x`, with `π` the zero-mean GP under `reference` and the same relative
/// jitter on both covariances.
pub fn joint_kl_to_reference(state: &GpVariationalState, reference: &RbfKernel, x: &[Vec<f64>]) -> Result<f64> {
    state.validate()?;
    let d = state.kernel.dim();
    if reference.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, actual: reference.dim() });
    }
    if let Some(p) = x.iter().find(|p| p.len() != d) {
        return Err(Error::DimensionMismatch { expected: d, actual: p.len() });
    }
    let n = x.len();
    let (l, v, r) = state.whiten()?;
    let xm = rows_to_mat(x, d);
    let c = solve_l(l.as_ref(), kernel_matrix(&state.kernel, state.z_mat().as_ref(), xm.as_ref())?.as_ref());
    let rc = mul_tri(r.transpose(), TriangularUpper, c.as_ref(), Rectangular, Rectangular);
    let mut cov = gram(&state.kernel, xm.as_ref(), state.jitter())?;
    cov -= c.transpose() * &c;
    cov += rc.transpose() * &rc;
    let mean = Mat::from_fn(n, 1, |i, _| (0..v.len()).map(|j| c[(j, i)] * v[j]).sum::<f64>());
    let lq = cholesky(cov.as_ref())?;
    let lp = cholesky(gram(reference, xm.as_ref(), state.jitter_rel * reference.variance())?.as_ref())?;
    let a = solve_l(lp.as_ref(), lq.as_ref());
    let b = solve_l(lp.as_ref(), mean.as_ref());
    let logdet = |m: &Mat<f64>| (0..n).map(|i| m[(i, i)].ln()).sum::<f64>();
    let tr: f64 = col_sq(a.as_ref()).iter().sum();
    let quad = col_sq(b.as_ref())[0];
    Ok(0.5 * (tr + quad - n as f64) + logdet(&lp) - logdet(&lq))
}

/// Minibatch ELBO: `(N/|B|) Σ_B E_q[log p(y_i | g_i)] − KL[q(u) ‖ p(u)]`.
pub fn elbo_gp(
    state: &GpVariationalState,
    obs: &Observations,
    batch: &[usize],
    n_total: usize,
    link: Link,
    gh: &GaussHermite,
) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::InvalidArgument("empty batch".into()));
    }
    let x: Vec<Vec<f64>> = batch.iter().map(|&i| obs.x[i].clone()).collect();
    let (mean, var) = q_g_marginals(state, &x)?;
    let lik: f64 = batch
        .iter()
        .enumerate()
        .map(|(b, &i)| expected_log_lik(mean[b], var[b], obs.successes[i], obs.trials[i], link, gh))
        .sum();
    let value = n_total as f64 / batch.len() as f64 * lik - kl_divergence(state)?;
    if !value.is_finite() {
        return Err(Error::NonFinite("GP ELBO".into()));
    }
    Ok(value)
}
