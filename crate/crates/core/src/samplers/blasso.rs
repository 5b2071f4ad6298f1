//! Bayesian LASSO with the scale-mixture-of-normals hierarchy.
//!
//! ```text
//! y | beta, s2        ~ N(X beta, s2 I)
//! beta_j | s2, t2_j   ~ N(0, s2 t2_j)
//! t2_j | l2           ~ Exp(l2 / 2)
//! l2                  ~ Gamma(shape a0, scale b0)
//! p(s2)               ~ 1 / s2
//! ```
//!
//! Conditionals: `beta ~ N(A^-1 X^T y, s2 A^-1)` with `A = X^T X + diag(1/t2)`;
//! `s2 ~ InvGamma(N/2 + M/2, 0.5 ||y - X beta||^2 + 0.5 sum beta_j^2 / t2_j)`;
//! `1/t2_j ~ InvGaussian(sqrt(l2 s2) / |beta_j|, l2)`;
//! `l2 ~ Gamma(M + a0, (sum t2_j / 2 + 1/b0)^-1)`.
//!
//! The coefficients are unconstrained in sign.

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, Gamma, StandardNormal};

use super::{
    check_finite, initial_sigma2, sample_inverse_gaussian, BayesMethod, ChainRecorder, PosteriorChain,
    SamplerConfig,
};
use crate::design::GeneProblem;
use crate::error::{Error, Result};
use crate::linalg::spd_cholesky;
use crate::point_estimators::fit_ridge;

/// Floor on `|beta_j|` when forming the inverse-Gaussian mean.
const BETA_FLOOR: f64 = 1e-12;

pub fn sample_blasso(problem: &GeneProblem, cfg: &SamplerConfig) -> Result<PosteriorChain> {
    cfg.validate()?;
    let (n, m) = (problem.n_samples(), problem.n_regressors());
    if n < 2 {
        return Err(Error::Parameter(format!("BLASSO needs at least 2 samples, got {n}")));
    }
    let x = problem.x();
    let y = problem.y();
    let gram = x.tr_mul(x);
    let xty = x.tr_mul(y);

    let mut rng = cfg.rng();
    let mut beta = fit_ridge(problem, 1.0)?.beta;
    let mut sigma2 = cfg.fixed_sigma2.unwrap_or_else(|| initial_sigma2(y));
    let mut inv_tau2 = DVector::from_element(m, 1.0);
    let mut lambda2 = cfg.fixed_lambda.unwrap_or(1.0);
    let sigma_shape = 0.5 * (n + m) as f64;
    let lambda_shape = m as f64 + cfg.alpha_lambda0;

    let mut recorder = ChainRecorder::new(cfg, m);
    for iteration in 0..ChainRecorder::total_iterations(cfg) {
        for j in 0..m {
            let mean = (lambda2 * sigma2).sqrt() / beta[j].abs().max(BETA_FLOOR);
            inv_tau2[j] = sample_inverse_gaussian(mean, lambda2, &mut rng).max(f64::MIN_POSITIVE);
        }
        check_finite(iteration, inv_tau2.iter().copied())?;

        if cfg.fixed_lambda.is_none() {
            let tau_sum: f64 = inv_tau2.iter().map(|t| 1.0 / t).sum();
            let scale = 1.0 / (0.5 * tau_sum + 1.0 / cfg.beta_lambda0);
            lambda2 = Gamma::new(lambda_shape, scale)
                .map_err(|_| Error::NonFiniteDraw { iteration })?
                .sample(&mut rng)
                .max(f64::MIN_POSITIVE);
            check_finite(iteration, [lambda2])?;
        }

        let mut a: DMatrix<f64> = gram.clone();
        for j in 0..m {
            a[(j, j)] += inv_tau2[j];
        }
        let chol = spd_cholesky(a).ok_or(Error::SingularPrecision)?;
        let mean = chol.solve(&xty);
        let z = DVector::from_fn(m, |_, _| StandardNormal.sample(&mut rng));
        // L^T w = z gives w ~ N(0, A^-1)
        let w = chol
            .l()
            .tr_solve_lower_triangular(&z)
            .ok_or(Error::NonFiniteDraw { iteration })?;
        beta = mean + sigma2.sqrt() * w;
        check_finite(iteration, beta.iter().copied())?;

        if cfg.fixed_sigma2.is_none() {
            let resid = y - x * &beta;
            let prior_ss: f64 = beta.iter().zip(inv_tau2.iter()).map(|(b, t)| b * b * t).sum();
            let rate = 0.5 * resid.norm_squared() + 0.5 * prior_ss;
            let precision_draw = Gamma::new(sigma_shape, 1.0 / rate)
                .map_err(|_| Error::NonFiniteDraw { iteration })?
                .sample(&mut rng);
            sigma2 = 1.0 / precision_draw;
            if !(sigma2 > 0.0) || !sigma2.is_finite() {
                return Err(Error::NonFiniteDraw { iteration });
            }
        }

        recorder.record(iteration, &beta, sigma2, &DVector::from_element(m, lambda2));
    }
    Ok(recorder.finish(problem, BayesMethod::Blasso, cfg.seed))
}
