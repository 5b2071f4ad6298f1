use nalgebra::{Cholesky, DMatrix, Dyn};

/// Relative pivot floor below which a symmetric matrix is treated as singular.
const PIVOT_FLOOR: f64 = 1e-12;

/// Cholesky factorization that also rejects numerically singular matrices.
pub(crate) fn spd_cholesky(matrix: DMatrix<f64>) -> Option<Cholesky<f64, Dyn>> {
    let scale = matrix.diagonal().max();
    if !(scale > 0.0) || !scale.is_finite() {
        return None;
    }
    let chol = Cholesky::new(matrix)?;
    let l = chol.l_dirty();
    let min_pivot = (0..l.nrows())
        .map(|i| l[(i, i)] * l[(i, i)])
        .fold(f64::INFINITY, f64::min);
    (min_pivot > PIVOT_FLOOR * scale).then_some(chol)
}
