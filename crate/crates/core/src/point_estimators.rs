//! Least squares, ridge, LASSO and non-negative LASSO point estimates.
//!
//! The penalized estimators minimize `0.5 * ||y - X beta||^2 + lambda * pen(beta)`
//! by cyclic coordinate descent. Non-negative LASSO clamps each coordinate
//! update at zero, which is exact coordinate minimization on the orthant.

use std::fmt;
use std::str::FromStr;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::design::{GeneProblem, RegressorLabel};
use crate::error::{Error, Result};
use crate::linalg::spd_cholesky;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PointMethod {
    Lsr,
    Ridge,
    Lasso,
    NLasso,
}

impl PointMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            PointMethod::Lsr => "lsr",
            PointMethod::Ridge => "ridge",
            PointMethod::Lasso => "lasso",
            PointMethod::NLasso => "nlasso",
        }
    }
}

impl fmt::Display for PointMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PointMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lsr" => Ok(PointMethod::Lsr),
            "ridge" => Ok(PointMethod::Ridge),
            "lasso" => Ok(PointMethod::Lasso),
            "nlasso" => Ok(PointMethod::NLasso),
            other => Err(Error::Parameter(format!("unknown point method `{other}`"))),
        }
    }
}

/// Coefficients from one point estimator on one gene.
#[derive(Debug, Clone, PartialEq)]
pub struct PointFit {
    pub gene_id: String,
    pub method: PointMethod,
    pub lambda: f64,
    pub beta: DVector<f64>,
    pub labels: Vec<RegressorLabel>,
    /// Selection threshold; regressors with `beta > threshold` are selected.
    pub threshold: f64,
    /// False when coordinate descent hit `max_iters` first. Always true for closed forms.
    pub converged: bool,
    pub iterations: usize,
}

impl PointFit {
    fn closed_form(problem: &GeneProblem, method: PointMethod, lambda: f64, beta: DVector<f64>) -> Self {
        Self {
            gene_id: problem.gene_id().to_string(),
            method,
            lambda,
            beta,
            labels: problem.labels().to_vec(),
            threshold: 0.0,
            converged: true,
            iterations: 0,
        }
    }

    pub fn selected(&self) -> Vec<(RegressorLabel, f64)> {
        select_by_threshold(self, self.threshold)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LassoConfig {
    pub lambda: f64,
    pub max_iters: usize,
    /// Convergence tolerance on the largest absolute coefficient change in a sweep.
    pub tol: f64,
}

impl LassoConfig {
    pub const DEFAULT_TOL: f64 = 1e-7;
    pub const DEFAULT_MAX_ITERS: usize = 10_000;

    pub fn new(lambda: f64) -> Self {
        Self {
            lambda,
            max_iters: Self::DEFAULT_MAX_ITERS,
            tol: Self::DEFAULT_TOL,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(Error::Parameter(format!(
                "lambda must be a nonnegative finite number, got {}",
                self.lambda
            )));
        }
        if !(self.tol > 0.0) {
            return Err(Error::Parameter(format!("tol must be positive, got {}", self.tol)));
        }
        if self.max_iters == 0 {
            return Err(Error::Parameter("max_iters must be at least 1".into()));
        }
        Ok(())
    }
}

/// Cholesky factor of `X^T X + ridge * I`, rejecting numerically singular systems.
fn gram_cholesky(x: &DMatrix<f64>, ridge: f64) -> Option<Cholesky<f64, Dyn>> {
    let mut gram = x.tr_mul(x);
    for i in 0..gram.nrows() {
        gram[(i, i)] += ridge;
    }
    spd_cholesky(gram)
}

/// Ordinary least squares via the normal equations.
pub fn fit_lsr(problem: &GeneProblem) -> Result<PointFit> {
    let (n, m) = (problem.n_samples(), problem.n_regressors());
    let singular = Error::SingularNormalEquations { n, m };
    if n < m {
        return Err(singular);
    }
    let chol = gram_cholesky(problem.x(), 0.0).ok_or(singular)?;
    let beta = chol.solve(&problem.x().tr_mul(problem.y()));
    Ok(PointFit::closed_form(problem, PointMethod::Lsr, 0.0, beta))
}

/// Ridge regression `(X^T X + lambda I)^{-1} X^T y`.
pub fn fit_ridge(problem: &GeneProblem, lambda: f64) -> Result<PointFit> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::Parameter(format!(
            "ridge lambda must be nonnegative, got {lambda}"
        )));
    }
    if lambda == 0.0 {
        let mut fit = fit_lsr(problem)?;
        fit.method = PointMethod::Ridge;
        return Ok(fit);
    }
    let chol = gram_cholesky(problem.x(), lambda).ok_or(Error::SingularNormalEquations {
        n: problem.n_samples(),
        m: problem.n_regressors(),
    })?;
    let beta = chol.solve(&problem.x().tr_mul(problem.y()));
    Ok(PointFit::closed_form(problem, PointMethod::Ridge, lambda, beta))
}

fn soft_threshold(value: f64, threshold: f64) -> f64 {
    if value > threshold {
        value - threshold
    } else if value < -threshold {
        value + threshold
    } else {
        0.0
    }
}

/// Output of a coordinate-descent run, including the per-sweep objective.
#[derive(Debug, Clone)]
pub struct DescentTrace {
    pub beta: DVector<f64>,
    pub converged: bool,
    pub sweeps: usize,
    /// Penalized objective after each completed sweep.
    pub objective: Vec<f64>,
}

/// Penalized objective `0.5 ||y - X beta||^2 + lambda ||beta||_1`.
pub fn lasso_objective(problem: &GeneProblem, beta: &DVector<f64>, lambda: f64) -> f64 {
    problem.half_rss(beta) + lambda * beta.iter().map(|b| b.abs()).sum::<f64>()
}

/// Cyclic coordinate descent for the (optionally non-negative) LASSO.
pub fn coordinate_descent(problem: &GeneProblem, cfg: &LassoConfig, nonnegative: bool) -> Result<DescentTrace> {
    cfg.validate()?;
    let x = problem.x();
    let m = x.ncols();
    let col_sq: Vec<f64> = x.column_iter().map(|c| c.norm_squared()).collect();
    let mut beta = DVector::<f64>::zeros(m);
    let mut residual = problem.y().clone();
    let mut objective = Vec::new();
    let mut converged = false;
    let mut sweeps = 0;

    while sweeps < cfg.max_iters {
        sweeps += 1;
        let mut max_delta = 0.0f64;
        for j in 0..m {
            if col_sq[j] == 0.0 {
                continue;
            }
            let col = x.column(j);
            let old = beta[j];
            let rho = col.dot(&residual) + col_sq[j] * old;
            let new = if nonnegative {
                (rho - cfg.lambda).max(0.0) / col_sq[j]
            } else {
                soft_threshold(rho, cfg.lambda) / col_sq[j]
            };
            let delta = new - old;
            if delta != 0.0 {
                residual.axpy(-delta, &col, 1.0);
                beta[j] = new;
                max_delta = max_delta.max(delta.abs());
            }
        }
        objective.push(0.5 * residual.norm_squared() + cfg.lambda * beta.iter().map(|b| b.abs()).sum::<f64>());
        if max_delta < cfg.tol {
            converged = true;
            break;
        }
    }
    Ok(DescentTrace {
        beta,
        converged,
        sweeps,
        objective,
    })
}

fn descent_fit(problem: &GeneProblem, cfg: &LassoConfig, method: PointMethod) -> Result<PointFit> {
    let trace = coordinate_descent(problem, cfg, method == PointMethod::NLasso)?;
    Ok(PointFit {
        gene_id: problem.gene_id().to_string(),
        method,
        lambda: cfg.lambda,
        beta: trace.beta,
        labels: problem.labels().to_vec(),
        threshold: 0.0,
        converged: trace.converged,
        iterations: trace.sweeps,
    })
}

pub fn fit_lasso(problem: &GeneProblem, cfg: &LassoConfig) -> Result<PointFit> {
    descent_fit(problem, cfg, PointMethod::Lasso)
}

/// LASSO restricted to `beta >= 0`; expects the negated-design convention.
pub fn fit_nlasso(problem: &GeneProblem, cfg: &LassoConfig) -> Result<PointFit> {
    descent_fit(problem, cfg, PointMethod::NLasso)
}

/// Fits `method` at `lambda` with default coordinate-descent settings.
pub fn fit_point(problem: &GeneProblem, method: PointMethod, lambda: f64) -> Result<PointFit> {
    match method {
        PointMethod::Lsr => fit_lsr(problem),
        PointMethod::Ridge => fit_ridge(problem, lambda),
        PointMethod::Lasso => fit_lasso(problem, &LassoConfig::new(lambda)),
        PointMethod::NLasso => fit_nlasso(problem, &LassoConfig::new(lambda)),
    }
}

/// Regressors with `beta > threshold`, largest first; ties keep regressor order.
pub fn select_by_threshold(fit: &PointFit, threshold: f64) -> Vec<(RegressorLabel, f64)> {
    let mut picked: Vec<(usize, f64)> = fit
        .beta
        .iter()
        .copied()
        .enumerate()
        .filter(|&(_, b)| b > threshold)
        .collect();
    picked.sort_by(|a, b| b.1.total_cmp(&a.1));
    picked
        .into_iter()
        .map(|(j, b)| (fit.labels[j].clone(), b))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::SignConvention;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn problem(n: usize, m: usize, x: &[f64], y: &[f64]) -> GeneProblem {
        GeneProblem::new(
            "g",
            DVector::from_column_slice(y),
            DMatrix::from_row_slice(n, m, x),
            (0..m).map(|j| RegressorLabel::Direct(format!("m{j}"))).collect(),
            SignConvention::NegatedDesign,
        )
        .unwrap()
    }

    fn random_problem(n: usize, m: usize, seed: u64) -> GeneProblem {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<f64> = (0..n * m).map(|_| rng.sample(StandardNormal)).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal) * 2.0).collect();
        problem(n, m, &x, &y)
    }

    /// Gaussian elimination with partial pivoting on the normal equations.
    fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
        let n = b.len();
        for k in 0..n {
            let p = (k..n).max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs())).unwrap();
            a.swap(k, p);
            b.swap(k, p);
            for i in k + 1..n {
                let f = a[i][k] / a[k][k];
                for j in k..n {
                    a[i][j] -= f * a[k][j];
                }
                b[i] -= f * b[k];
            }
        }
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            let s: f64 = (i + 1..n).map(|j| a[i][j] * x[j]).sum();
            x[i] = (b[i] - s) / a[i][i];
        }
        x
    }

    fn normal_equations_oracle(p: &GeneProblem, ridge: f64) -> Vec<f64> {
        let (n, m) = (p.n_samples(), p.n_regressors());
        let x = p.x();
        let a = (0..m)
            .map(|i| {
                (0..m)
                    .map(|j| (0..n).map(|r| x[(r, i)] * x[(r, j)]).sum::<f64>() + if i == j { ridge } else { 0.0 })
                    .collect()
            })
            .collect();
        let b = (0..m).map(|i| (0..n).map(|r| x[(r, i)] * p.y()[r]).sum()).collect();
        gauss_solve(a, b)
    }

    #[test]
    fn lsr_identity_and_exact_line() {
        let p = problem(3, 3, &[1., 0., 0., 0., 1., 0., 0., 0., 1.], &[4.0, -2.0, 0.5]);
        let fit = fit_lsr(&p).unwrap();
        assert!((fit.beta - DVector::from_column_slice(&[4.0, -2.0, 0.5])).amax() < 1e-14);

        let p = problem(3, 1, &[1., 2., 3.], &[2., 4., 6.]);
        assert!((fit_lsr(&p).unwrap().beta[0] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn lsr_matches_gaussian_elimination() {
        let p = random_problem(10, 3, 7);
        let fit = fit_lsr(&p).unwrap();
        let oracle = normal_equations_oracle(&p, 0.0);
        for (a, b) in fit.beta.iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-10);
        }
        let grad = p.x().tr_mul(&(p.y() - p.x() * &fit.beta));
        assert!(grad.amax() < 1e-10);
    }

    #[test]
    fn lsr_rejects_wide_and_collinear_designs() {
        let p = random_problem(3, 5, 1);
        assert!(matches!(fit_lsr(&p), Err(Error::SingularNormalEquations { n: 3, m: 5 })));
        let p = problem(3, 2, &[1., 2., 2., 4., 3., 6.], &[1., 2., 3.]);
        assert!(fit_lsr(&p).is_err());
    }

    #[test]
    fn ridge_limits_and_wide_problem() {
        let p = random_problem(10, 3, 11);
        let lsr = fit_lsr(&p).unwrap();
        let tiny = fit_ridge(&p, 1e-10).unwrap();
        assert!((lsr.beta - tiny.beta).amax() < 1e-6);
        let huge = fit_ridge(&p, 1e10).unwrap();
        assert!(huge.beta.amax() < 1e-6);

        let p = random_problem(5, 8, 3);
        let fit = fit_ridge(&p, 1.0).unwrap();
        let oracle = normal_equations_oracle(&p, 1.0);
        for (a, b) in fit.beta.iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-10);
        }
        assert!(fit_ridge(&p, -1.0).is_err());
    }

    #[test]
    fn ridge_norm_shrinks_along_ladder() {
        let p = random_problem(12, 6, 5);
        let norms: Vec<f64> = [0.01, 0.1, 1.0, 10.0, 100.0]
            .iter()
            .map(|&l| fit_ridge(&p, l).unwrap().beta.norm())
            .collect();
        assert!(norms.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn lasso_zero_at_critical_penalty() {
        let p = crate::design::standardize(&random_problem(20, 4, 9), true, true).unwrap();
        let crit = p.x().tr_mul(p.y()).amax();
        let fit = fit_lasso(&p, &LassoConfig::new(crit)).unwrap();
        assert!(fit.beta.iter().all(|&b| b == 0.0));
        assert!(fit.converged);
    }

    #[test]
    fn lasso_unpenalized_is_lsr() {
        let p = random_problem(15, 4, 21);
        let lsr = fit_lsr(&p).unwrap();
        let cfg = LassoConfig { tol: 1e-12, ..LassoConfig::new(0.0) };
        let lasso = fit_lasso(&p, &cfg).unwrap();
        assert!((lsr.beta - lasso.beta).amax() < 1e-6);
    }

    #[test]
    fn nlasso_agrees_when_constraints_inactive() {
        // y built from a positive truth so the unconstrained solution is positive
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x: Vec<f64> = (0..40 * 3).map(|_| rng.sample(StandardNormal)).collect();
        let xm = DMatrix::from_row_slice(40, 3, &x);
        let y = &xm * DVector::from_column_slice(&[1.0, 2.0, 0.5])
            + DVector::from_fn(40, |_, _| 0.1 * rng.sample::<f64, _>(StandardNormal));
        let p = problem(40, 3, &x, y.as_slice());
        let cfg = LassoConfig::new(0.5);
        let lasso = fit_lasso(&p, &cfg).unwrap();
        assert!(lasso.beta.iter().all(|&b| b > 0.0));
        let nlasso = fit_nlasso(&p, &cfg).unwrap();
        assert!((lasso.beta - nlasso.beta).amax() < 1e-8);
    }

    #[test]
    fn nlasso_binds_on_negative_correlation() {
        let p = problem(3, 1, &[1., 2., 3.], &[-1., -2., -3.]);
        let fit = fit_nlasso(&p, &LassoConfig::new(0.1)).unwrap();
        assert_eq!(fit.beta[0], 0.0);
    }

    #[test]
    fn non_convergence_is_flagged() {
        let p = random_problem(10, 5, 2);
        let cfg = LassoConfig { max_iters: 1, tol: 1e-15, ..LassoConfig::new(0.01) };
        let fit = fit_lasso(&p, &cfg).unwrap();
        assert!(!fit.converged);
        assert_eq!(fit.iterations, 1);
        assert!(LassoConfig { tol: 0.0, ..cfg }.validate().is_err());
        assert!(LassoConfig { max_iters: 0, ..cfg }.validate().is_err());
    }

    #[test]
    fn orthonormal_support_is_nested() {
        // columns of a scaled Hadamard-like design are orthonormal
        let s = 0.5;
        let x = [s, s, s, s, s, -s, s, -s, s, s, -s, -s, s, -s, -s, s];
        let p = problem(4, 4, &x, &[3.0, -1.0, 0.4, 2.0]);
        let support = |l: f64| {
            fit_lasso(&p, &LassoConfig::new(l)).unwrap().beta.iter().filter(|b| **b != 0.0).count()
        };
        let sizes: Vec<usize> = [0.0, 0.2, 0.5, 1.0, 1.5, 2.0, 5.0].iter().map(|&l| support(l)).collect();
        assert!(sizes.windows(2).all(|w| w[1] <= w[0]), "{sizes:?}");
    }

    #[test]
    fn threshold_selection() {
        let fit = PointFit {
            gene_id: "g".into(),
            method: PointMethod::NLasso,
            lambda: 0.1,
            beta: DVector::from_column_slice(&[0.0, 0.2, 0.05, 0.2]),
            labels: (0..4).map(|j| RegressorLabel::Direct(format!("m{j}"))).collect(),
            threshold: 0.0,
            converged: true,
            iterations: 1,
        };
        let all = select_by_threshold(&fit, 0.0);
        let names: Vec<String> = all.iter().map(|(l, _)| l.to_string()).collect();
        assert_eq!(names, ["m1", "m3", "m2"]);
        assert_eq!(select_by_threshold(&fit, 0.1).len(), 2);
        assert_eq!(fit.selected().len(), 3);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn descent_objective_is_monotone(seed in 0u64..10_000, lambda in 0.0f64..3.0, nonneg: bool) {
            let p = random_problem(8, 5, seed);
            let trace = coordinate_descent(&p, &LassoConfig::new(lambda), nonneg).unwrap();
            let scale = p.y().norm_squared().max(1.0);
            for w in trace.objective.windows(2) {
                prop_assert!(w[1] <= w[0] + 1e-12 * scale);
            }
            if nonneg {
                prop_assert!(trace.beta.iter().all(|&b| b >= 0.0));
            }
        }
    }
}
