//! Truncated multivariate normal draws by coordinatewise Gibbs sweeps.
//!
//! Each coordinate conditional is a univariate normal `N(u_i, v_i^2)` truncated
//! to `(c_i, d_i)`. After standardizing to `xi = (z_i - u_i) / v_i`, the
//! truncated standard normal is updated with the two-uniform slice scheme:
//! `y | xi ~ U(0, exp(-xi^2 / 2))`, then `xi | y` uniform on the slice
//! intersected with the support.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::spd_cholesky;

/// One slice update of a standard normal truncated to `[lower, upper]`.
///
/// `current` must lie in the support. The slice height is handled in log
/// space so that currents far in a tail do not underflow.
pub fn slice_step_std_normal<R: Rng + ?Sized>(current: f64, lower: f64, upper: f64, rng: &mut R) -> f64 {
    // u in (0, 1]
    let u: f64 = 1.0 - rng.random::<f64>();
    let half_width = (current * current - 2.0 * u.ln()).sqrt();
    let lo = lower.max(-half_width);
    let hi = upper.min(half_width);
    let draw = lo + (hi - lo) * rng.random::<f64>();
    draw.clamp(lo, hi)
}

/// Conditional mean and variance of coordinate `i` given the others.
///
/// `u_i = mu_i + (1 / w_ii) * sum_{j != i} (mu_j - z_j) * w_ij`, `v_i^2 = 1 / w_ii`,
/// where `w` is the precision matrix.
pub fn conditional_moments(mu: &DVector<f64>, precision: &DMatrix<f64>, z: &DVector<f64>, i: usize) -> (f64, f64) {
    let w_ii = precision[(i, i)];
    let mut cross = 0.0;
    for j in 0..mu.len() {
        if j != i {
            cross += (mu[j] - z[j]) * precision[(i, j)];
        }
    }
    (mu[i] + cross / w_ii, 1.0 / w_ii)
}

/// One systematic-scan sweep over all coordinates, updating `z` in place.
pub fn gibbs_sweep<R: Rng + ?Sized>(
    mu: &DVector<f64>,
    precision: &DMatrix<f64>,
    lower: &DVector<f64>,
    upper: &DVector<f64>,
    z: &mut DVector<f64>,
    rng: &mut R,
) -> Result<()> {
    for i in 0..mu.len() {
        let (u, v2) = conditional_moments(mu, precision, z, i);
        let v = v2.sqrt();
        let c = (lower[i] - u) / v;
        let d = (upper[i] - u) / v;
        if !(c < d) || !u.is_finite() || !(v > 0.0) {
            return Err(Error::EmptyTruncation { coordinate: i });
        }
        let xi = ((z[i] - u) / v).clamp(c, d);
        let next = slice_step_std_normal(xi, c, d, rng);
        z[i] = (u + v * next).clamp(lower[i], upper[i]);
    }
    Ok(())
}

/// Draws the next state of a Gibbs chain targeting `N(mu, sigma)` restricted to
/// the box `[lower, upper]`, starting from `current`.
pub fn sample_truncated_mvn<R: Rng + ?Sized>(
    mu: &DVector<f64>,
    sigma: &DMatrix<f64>,
    lower: &DVector<f64>,
    upper: &DVector<f64>,
    current: &DVector<f64>,
    rng: &mut R,
) -> Result<DVector<f64>> {
    let m = mu.len();
    if sigma.shape() != (m, m) || lower.len() != m || upper.len() != m || current.len() != m {
        return Err(Error::Parameter(format!(
            "dimension mismatch: mu has length {m}, sigma is {}x{}",
            sigma.nrows(),
            sigma.ncols()
        )));
    }
    for i in 0..m {
        if !(lower[i] < upper[i]) {
            return Err(Error::EmptyTruncation { coordinate: i });
        }
        if !(lower[i] <= current[i] && current[i] <= upper[i]) {
            return Err(Error::Parameter(format!(
                "current[{i}] = {} lies outside [{}, {}]",
                current[i], lower[i], upper[i]
            )));
        }
    }
    if (sigma - sigma.transpose()).amax() > 1e-10 * sigma.amax() {
        return Err(Error::FactorizationFailed);
    }
    let precision = spd_cholesky(sigma.clone())
        .ok_or(Error::FactorizationFailed)?
        .inverse();
    let mut z = current.clone();
    gibbs_sweep(mu, &precision, lower, upper, &mut z, rng)?;
    Ok(z)
}
