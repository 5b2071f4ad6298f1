//! Non-negative Bayesian LASSO.
//!
//! Model, written for the stored design (which is already negated under the
//! down-regulation convention, so the mean is `X beta`):
//!
//! ```text
//! y | beta, s2      ~ N(X beta, s2 I)
//! beta_m | s2, l_m  ~ (l_m / 2 s2) exp(-l_m beta_m / 2 s2) 1{beta_m >= 0}
//! l_m               ~ Gamma(shape a0, scale b0)
//! p(s2)             ~ 1 / s2
//! ```
//!
//! Conditionals: `beta ~ N+(mu, s2 G^-1)` with `G = X^T X` and
//! `mu = G^-1 (X^T y - lambda / 2)`; `1/s2 ~ Gamma(N/2 + M + 2, scale)` with
//! `scale = [0.5 ||y - X beta||^2 + 0.5 sum l_m beta_m]^-1`; and
//! `l_m ~ Gamma(a0 + 1, (1/b0 + beta_m / (2 s2))^-1)`.

use nalgebra::DVector;
use rand_distr::{Distribution, Gamma};

use super::truncated::gibbs_sweep;
use super::{check_finite, initial_sigma2, BayesMethod, ChainRecorder, PosteriorChain, SamplerConfig};
use crate::design::GeneProblem;
use crate::error::{Error, Result};
use crate::linalg::spd_cholesky;

const INITIAL_BETA: f64 = 1e-3;

pub fn sample_nblasso(problem: &GeneProblem, cfg: &SamplerConfig) -> Result<PosteriorChain> {
    cfg.validate()?;
    let x = problem.x();
    let y = problem.y();
    let (n, m) = (problem.n_samples(), problem.n_regressors());
    let gram = x.tr_mul(x);
    let chol = spd_cholesky(gram.clone()).ok_or(Error::SingularPrecision)?;
    let xty = x.tr_mul(y);

    let mut rng = cfg.rng();
    let mut beta = DVector::from_element(m, INITIAL_BETA);
    let mut sigma2 = cfg.fixed_sigma2.unwrap_or_else(|| initial_sigma2(y));
    let mut lambda = DVector::from_element(m, cfg.fixed_lambda.unwrap_or(1.0));
    let lower = DVector::zeros(m);
    let upper = DVector::from_element(m, f64::INFINITY);
    let sigma_shape = 0.5 * n as f64 + m as f64 + 2.0;
    let lambda_shape = cfg.alpha_lambda0 + 1.0;

    let mut recorder = ChainRecorder::new(cfg, m);
    for iteration in 0..ChainRecorder::total_iterations(cfg) {
        let mu = chol.solve(&(&xty - 0.5 * &lambda));
        let precision = &gram / sigma2;
        gibbs_sweep(&mu, &precision, &lower, &upper, &mut beta, &mut rng)?;
        check_finite(iteration, beta.iter().copied())?;

        if cfg.fixed_sigma2.is_none() {
            let resid = y - x * &beta;
            let penalty: f64 = lambda.dot(&beta);
            let scale = 1.0 / (0.5 * resid.norm_squared() + 0.5 * penalty);
            let precision_draw = Gamma::new(sigma_shape, scale)
                .map_err(|_| Error::NonFiniteDraw { iteration })?
                .sample(&mut rng);
            sigma2 = 1.0 / precision_draw;
            if !(sigma2 > 0.0) || !sigma2.is_finite() {
                return Err(Error::NonFiniteDraw { iteration });
            }
        }

        if cfg.fixed_lambda.is_none() {
            for j in 0..m {
                let scale = 1.0 / (1.0 / cfg.beta_lambda0 + beta[j] / (2.0 * sigma2));
                lambda[j] = Gamma::new(lambda_shape, scale)
                    .map_err(|_| Error::NonFiniteDraw { iteration })?
                    .sample(&mut rng);
            }
            check_finite(iteration, lambda.iter().copied())?;
            if lambda.iter().any(|&l| !(l > 0.0)) {
                // a zero draw would leave the prior improper; keep the smallest positive value
                lambda.apply(|l| *l = l.max(f64::MIN_POSITIVE));
            }
        }

        recorder.record(iteration, &beta, sigma2, &lambda);
    }
    Ok(recorder.finish(problem, BayesMethod::NBlasso, cfg.seed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::{RegressorLabel, SignConvention};
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn random_problem(n: usize, m: usize, seed: u64) -> GeneProblem {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = DMatrix::from_fn(n, m, |_, _| rng.sample(StandardNormal));
        let y = DVector::from_fn(n, |_, _| rng.sample(StandardNormal));
        GeneProblem::new(
            "g",
            y,
            x,
            (0..m).map(|j| RegressorLabel::Direct(format!("m{j}"))).collect(),
            SignConvention::NegatedDesign,
        )
        .unwrap()
    }

    #[test]
    fn support_and_positivity() {
        let p = random_problem(30, 4, 1);
        let cfg = SamplerConfig { n_samples: 500, burn_in: 100, seed: 5, ..Default::default() };
        let chain = sample_nblasso(&p, &cfg).unwrap();
        assert_eq!(chain.n_draws(), 500);
        assert!(chain.beta_draws.iter().all(|&b| b >= 0.0));
        assert!(chain.sigma2_draws.iter().all(|&s| s > 0.0 && s.is_finite()));
        assert!(chain.lambda_draws.iter().all(|&l| l > 0.0 && l.is_finite()));
    }

    #[test]
    fn seeded_chains_are_identical() {
        let p = random_problem(20, 3, 2);
        let cfg = SamplerConfig { n_samples: 200, burn_in: 10, thin: 3, seed: 99, ..Default::default() };
        let a = sample_nblasso(&p, &cfg).unwrap();
        let b = sample_nblasso(&p, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.n_draws(), 66);
        let c = sample_nblasso(&p, &SamplerConfig { seed: 100, ..cfg }).unwrap();
        assert_ne!(a.beta_draws, c.beta_draws);
    }

    #[test]
    fn singular_design_is_rejected() {
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 2.0, 4.0, 3.0, 6.0]);
        let p = GeneProblem::new(
            "g",
            DVector::from_element(3, 1.0),
            x,
            vec![RegressorLabel::Direct("a".into()), RegressorLabel::Direct("b".into())],
            SignConvention::NegatedDesign,
        )
        .unwrap();
        assert_eq!(sample_nblasso(&p, &SamplerConfig::default()), Err(Error::SingularPrecision));
    }
}
