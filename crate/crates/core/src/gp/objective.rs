//! ELBO gradients by hand-written reverse mode.
//!
//! Training runs in whitened coordinates `η = L v`, `S = L R` with
//! `L = chol(K_mm)`. [`elbo_gp_grad`] converts to partial derivatives with
//! respect to the stored `(η, S)` for callers that want them.

use faer::{Mat, MatRef};

use super::kernel::{accumulate_cross_grad, accumulate_gram_grad, gram, RbfKernel};
use super::linalg::{cholesky, cholesky_backward, mul, mul_tri, solve_lt, tril};
use faer::linalg::matmul::triangular::BlockStructure::{Rectangular, TriangularLower, TriangularUpper};
use super::state::{rows_to_mat, whitened_kl, whitened_marginals, GpVariationalState, Observations};
use crate::error::{Error, Result};
use crate::likelihood::{expected_log_lik_grad, Link};
use crate::quadrature::GaussHermite;

/// Gradients of the ELBO (ascent direction).
#[derive(Debug, Clone)]
pub struct ElboGrad {
    pub value: f64,
    /// `∂/∂v` in whitened runs, `∂/∂η` from [`elbo_gp_grad`].
    pub mean: Vec<f64>,
    /// Lower triangle: `∂/∂R` or `∂/∂S`.
    pub chol: Mat<f64>,
    pub z: Mat<f64>,
    pub log_lengthscale: Vec<f64>,
    pub log_variance: f64,
}

pub(crate) struct Problem<'a> {
    pub kernel: &'a RbfKernel,
    pub z: MatRef<'a, f64>,
    pub jitter_rel: f64,
    pub obs: &'a Observations,
    pub batch: &'a [usize],
    pub n_total: usize,
    pub link: Link,
    pub gh: &'a GaussHermite,
}

struct Partial {
    grad: ElboGrad,
    kmm: Mat<f64>,
    l: Mat<f64>,
    l_bar: Mat<f64>,
}

fn forward_backward(p: &Problem<'_>, l: Mat<f64>, kmm: Mat<f64>, v: &[f64], r: MatRef<'_, f64>) -> Result<Partial> {
    let m = p.z.nrows();
    let d = p.kernel.dim();
    let b = p.batch.len();
    if b == 0 {
        return Err(Error::InvalidArgument("empty batch".into()));
    }
    let x = Mat::from_fn(b, d, |i, k| p.obs.x[p.batch[i]][k]);
    let jitter = p.jitter_rel * p.kernel.variance();
    let (mean, var, kmx, c) = whitened_marginals(p.kernel, p.z, l.as_ref(), jitter, v, r, x.as_ref())?;

    let scale = p.n_total as f64 / b as f64;
    let mut lik = 0.0;
    let mut g_mu = vec![0.0; b];
    let mut g_var = vec![0.0; b];
    for i in 0..b {
        let j = p.batch[i];
        let (e, dm, dv) = expected_log_lik_grad(mean[i], var[i], p.obs.successes[j], p.obs.trials[j], p.link, p.gh);
        lik += e;
        g_mu[i] = scale * dm;
        g_var[i] = scale * dv;
    }
    let value = scale * lik - whitened_kl(v, r);
    if !value.is_finite() {
        return Err(Error::NonFinite("GP ELBO".into()));
    }

    // v̄ = C gμ − v
    let v_bar: Vec<f64> = (0..m).map(|j| (0..b).map(|i| c[(j, i)] * g_mu[i]).sum::<f64>() - v[j]).collect();

    // R̄ = tril(2 (C D)(RᵀC)ᵀ) − R + diag(1/R_jj)
    let rc = mul_tri(r.transpose(), TriangularUpper, c.as_ref(), Rectangular, Rectangular);
    let cd = Mat::from_fn(m, b, |j, i| 2.0 * c[(j, i)] * g_var[i]);
    let mut r_bar = mul_tri(cd.as_ref(), Rectangular, rc.transpose(), Rectangular, TriangularLower);
    for j in 0..m {
        for i in j..m {
            r_bar[(i, j)] -= r[(i, j)];
        }
        r_bar[(j, j)] += 1.0 / r[(j, j)];
    }

    // C̄ = v gμᵀ + 2 (R RᵀC − C) D
    let rrc = mul_tri(r, TriangularLower, rc.as_ref(), Rectangular, Rectangular);
    let c_bar = Mat::from_fn(m, b, |j, i| v[j] * g_mu[i] + 2.0 * (rrc[(j, i)] - c[(j, i)]) * g_var[i]);
    let kmx_bar = solve_lt(l.as_ref(), c_bar.as_ref());
    let l_bar = mul_tri(kmx_bar.as_ref(), Rectangular, c.transpose(), Rectangular, TriangularLower) * -1.0;

    let mut z_bar = Mat::zeros(m, d);
    let mut log_l_bar = vec![0.0; d];
    let mut log_var_bar = 0.0;
    accumulate_cross_grad(p.kernel, p.z, x.as_ref(), kmx.as_ref(), kmx_bar.as_ref(), &mut z_bar, &mut log_l_bar, &mut log_var_bar);
    // prior variance plus jitter at the batch inputs both scale with σ²
    log_var_bar += (p.kernel.variance() + jitter) * g_var.iter().sum::<f64>();

    let grad = ElboGrad { value, mean: v_bar, chol: r_bar, z: z_bar, log_lengthscale: log_l_bar, log_variance: log_var_bar };
    Ok(Partial { grad, kmm, l, l_bar })
}

fn finish(p: &Problem<'_>, part: Partial) -> ElboGrad {
    let Partial { mut grad, kmm, l, l_bar } = part;
    let a_bar = cholesky_backward(l.as_ref(), l_bar.as_ref());
    accumulate_gram_grad(
        p.kernel,
        p.z,
        kmm.as_ref(),
        a_bar.as_ref(),
        &mut grad.z,
        &mut grad.log_lengthscale,
        &mut grad.log_variance,
    );
    grad
}

fn factor(p: &Problem<'_>) -> Result<(Mat<f64>, Mat<f64>)> {
    let kmm = gram(p.kernel, p.z, p.jitter_rel * p.kernel.variance())?;
    let l = cholesky(kmm.as_ref())?;
    Ok((l, kmm))
}

/// ELBO and its gradient with `(v, R)` held fixed while `Z` and the kernel move.
pub(crate) fn whitened_elbo_grad(p: &Problem<'_>, v: &[f64], r: MatRef<'_, f64>) -> Result<ElboGrad> {
    let (l, kmm) = factor(p)?;
    let part = forward_backward(p, l, kmm, v, r)?;
    Ok(finish(p, part))
}

/// ELBO and its partial derivatives with respect to `η`, `S`, `Z` and the
/// log kernel hyperparameters.
pub fn elbo_gp_grad(
    state: &GpVariationalState,
    obs: &Observations,
    batch: &[usize],
    n_total: usize,
    link: Link,
    gh: &GaussHermite,
) -> Result<ElboGrad> {
    state.validate()?;
    let z = rows_to_mat(&state.z, state.kernel.dim());
    let p = Problem { kernel: &state.kernel, z: z.as_ref(), jitter_rel: state.jitter_rel, obs, batch, n_total, link, gh };
    let (l, kmm) = factor(&p)?;
    let (_, v, r) = state.whiten()?;
    let mut part = forward_backward(&p, l, kmm, &v, r.as_ref())?;
    let m = state.m();
    // v = L⁻¹η and R = L⁻¹S also depend on L
    let v_bar = Mat::from_fn(m, 1, |j, _| part.grad.mean[j]);
    let eta_bar = solve_lt(part.l.as_ref(), v_bar.as_ref());
    let s_bar_full = solve_lt(part.l.as_ref(), part.grad.chol.as_ref());
    let vv = Mat::from_fn(m, m, |i, j| eta_bar[(i, 0)] * v[j]);
    let rr = mul(s_bar_full.as_ref(), r.transpose());
    part.l_bar = &part.l_bar - tril((&vv + &rr).as_ref());
    part.grad.mean = (0..m).map(|j| eta_bar[(j, 0)]).collect();
    part.grad.chol = tril(s_bar_full.as_ref());
    Ok(finish(&p, part))
}
