//! Dense helpers on top of faer used by the GP code.

use faer::linalg::matmul::matmul;
use faer::linalg::matmul::triangular::{self, BlockStructure};
use faer::linalg::triangular_solve::{solve_lower_triangular_in_place, solve_upper_triangular_in_place};
use faer::{Accum, Mat, MatRef, Par, Side};

use crate::error::{Error, Result};

/// Lower Cholesky factor with an explicitly zeroed upper triangle.
pub(crate) fn cholesky(a: MatRef<'_, f64>) -> Result<Mat<f64>> {
    let llt = a
        .llt(Side::Lower)
        .map_err(|e| Error::Factorization(format!("{e:?} (increase jitter or remove duplicate inducing points)")))?;
    let l = llt.L();
    Ok(Mat::from_fn(a.nrows(), a.ncols(), |i, j| if i >= j { l[(i, j)] } else { 0.0 }))
}

/// `L⁻¹ B`.
pub(crate) fn solve_l(l: MatRef<'_, f64>, b: MatRef<'_, f64>) -> Mat<f64> {
    let mut x = b.to_owned();
    solve_lower_triangular_in_place(l, x.as_mut(), Par::Seq);
    x
}

/// `L⁻ᵀ B`.
pub(crate) fn solve_lt(l: MatRef<'_, f64>, b: MatRef<'_, f64>) -> Mat<f64> {
    let mut x = b.to_owned();
    solve_upper_triangular_in_place(l.transpose(), x.as_mut(), Par::Seq);
    x
}

/// `A B`.
pub(crate) fn mul(a: MatRef<'_, f64>, b: MatRef<'_, f64>) -> Mat<f64> {
    let mut c = Mat::zeros(a.nrows(), b.ncols());
    matmul(c.as_mut(), Accum::Replace, a, b, 1.0, Par::Seq);
    c
}

/// `A B` where the operands and the result may be triangular; entries
/// outside `dst` structure are zero.
pub(crate) fn mul_tri(
    a: MatRef<'_, f64>,
    a_s: BlockStructure,
    b: MatRef<'_, f64>,
    b_s: BlockStructure,
    dst_s: BlockStructure,
) -> Mat<f64> {
    let mut c = Mat::zeros(a.nrows(), b.ncols());
    triangular::matmul(c.as_mut(), dst_s, Accum::Replace, a, a_s, b, b_s, 1.0, Par::Seq);
    c
}

/// Keeps the lower triangle, diagonal included.
pub(crate) fn tril(a: MatRef<'_, f64>) -> Mat<f64> {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| if i >= j { a[(i, j)] } else { 0.0 })
}

/// Reverse-mode step through `A = L Lᵀ`: given `∂F/∂L` (lower), returns the
/// symmetric `∂F/∂A`. Only symmetric up to rounding; callers read the lower
/// triangle.
pub(crate) fn cholesky_backward(l: MatRef<'_, f64>, l_bar: MatRef<'_, f64>) -> Mat<f64> {
    let n = l.nrows();
    let ltl = mul_tri(
        l.transpose(),
        BlockStructure::TriangularUpper,
        l_bar,
        BlockStructure::TriangularLower,
        BlockStructure::TriangularLower,
    );
    // lower triangle of Lᵀ L̄ with the diagonal halved, then symmetrized
    let half = Mat::from_fn(n, n, |i, j| match i.cmp(&j) {
        std::cmp::Ordering::Equal => 0.25 * ltl[(i, i)],
        std::cmp::Ordering::Greater => 0.5 * ltl[(i, j)],
        std::cmp::Ordering::Less => 0.0,
    });
    let psi = &half + half.transpose();
    let y = solve_lt(l, psi.as_ref());
    // (L⁻ᵀ Ψ L⁻¹)ᵀ, symmetric up to rounding
    solve_lt(l, y.transpose())
}

/// Sum of squares of each column.
pub(crate) fn col_sq(a: MatRef<'_, f64>) -> Vec<f64> {
    (0..a.ncols()).map(|j| (0..a.nrows()).map(|i| a[(i, j)] * a[(i, j)]).sum()).collect()
}
