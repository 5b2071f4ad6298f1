//! K-fold cross-validation of the penalty for ridge, LASSO and nLASSO.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::design::GeneProblem;
use crate::error::{Error, Result};
use crate::execution::Execution;
use crate::point_estimators::{fit_point, PointMethod};

/// Penalty ladder `lambda_j = (j / j0)^c` for `j = 1 ..= floor(a * j0)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LambdaGrid {
    pub j0: f64,
    pub c: u32,
    pub a: u32,
    values: Vec<f64>,
}

impl LambdaGrid {
    pub fn new(j0: f64, c: u32, a: u32) -> Result<Self> {
        if !(j0 > 0.0) || !j0.is_finite() || c == 0 || a == 0 {
            return Err(Error::Parameter(format!(
                "lambda grid needs j0 > 0, c >= 1, a >= 1 (got j0={j0}, c={c}, a={a})"
            )));
        }
        let top = (a as f64 * j0).floor() as usize;
        if top == 0 {
            return Err(Error::Parameter(format!("lambda grid with j0={j0}, a={a} is empty")));
        }
        let values = (1..=top).map(|j| (j as f64 / j0).powi(c as i32)).collect();
        Ok(Self { j0, c, a, values })
    }

    /// Grid holding exactly the given (strictly increasing, positive) values.
    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        if values.is_empty()
            || values.iter().any(|v| !(*v > 0.0) || !v.is_finite())
            || values.windows(2).any(|w| !(w[0] < w[1]))
        {
            return Err(Error::Parameter(
                "grid values must be nonempty, positive and strictly increasing".into(),
            ));
        }
        Ok(Self {
            j0: f64::NAN,
            c: 0,
            a: 0,
            values,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

impl Default for LambdaGrid {
    fn default() -> Self {
        Self::new(10.0, 2, 10).expect("default grid is valid")
    }
}

/// Seeded shuffle of `0..n` cut into `k` contiguous chunks.
///
/// The first `n % k` folds get one extra sample. Indices within each fold are
/// sorted ascending.
pub fn make_folds(n: usize, k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 || k > n {
        return Err(Error::Parameter(format!(
            "fold count must satisfy 2 <= k <= n (k={k}, n={n})"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (base, extra) = (n / k, n % k);
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let size = base + usize::from(f < extra);
        let mut fold = order[start..start + size].to_vec();
        fold.sort_unstable();
        folds.push(fold);
        start += size;
    }
    Ok(folds)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvResult {
    pub gene_id: String,
    pub method: PointMethod,
    /// `(lambda, mean held-out squared error)` in grid order.
    pub per_lambda_mean_error: Vec<(f64, f64)>,
    pub chosen_lambda: f64,
    pub chosen_index: usize,
    pub fold_sizes: Vec<usize>,
    pub fold_assignment_seed: u64,
}

/// Held-out squared error `(y_test - X_test beta)^T (y_test - X_test beta)`
/// for each fold, fitted at a single `lambda`.
pub fn fold_errors(
    problem: &GeneProblem,
    method: PointMethod,
    lambda: f64,
    folds: &[Vec<usize>],
) -> Result<Vec<f64>> {
    let n = problem.n_samples();
    folds
        .iter()
        .enumerate()
        .map(|(f, test)| {
            let mut in_test = vec![false; n];
            for &i in test {
                in_test[i] = true;
            }
            let train: Vec<usize> = (0..n).filter(|&i| !in_test[i]).collect();
            let fit = fit_point(&problem.subset_rows(&train), method, lambda).map_err(|e| Error::FoldFit {
                fold: f,
                lambda,
                source: Box::new(e),
            })?;
            let held_out = problem.subset_rows(test);
            Ok((held_out.y() - held_out.x() * &fit.beta).norm_squared())
        })
        .collect()
}

/// Picks the grid penalty with the smallest mean held-out error; ties go to
/// the smaller penalty.
pub fn cv_select_lambda(
    problem: &GeneProblem,
    method: PointMethod,
    grid: &LambdaGrid,
    k: usize,
    seed: u64,
    execution: Execution,
) -> Result<CvResult> {
    if method == PointMethod::Lsr {
        return Err(Error::Parameter("least squares has no penalty to cross-validate".into()));
    }
    if grid.is_empty() {
        return Err(Error::Parameter("empty lambda grid".into()));
    }
    let folds = make_folds(problem.n_samples(), k, seed)?;
    let errors = execution.try_map(grid.values(), |&lambda| {
        let errs = fold_errors(problem, method, lambda, &folds)?;
        Ok::<_, Error>(errs.iter().sum::<f64>() / errs.len() as f64)
    })?;
    let mut chosen_index = 0;
    for (i, e) in errors.iter().enumerate() {
        if *e < errors[chosen_index] {
            chosen_index = i;
        }
    }
    Ok(CvResult {
        gene_id: problem.gene_id().to_string(),
        method,
        per_lambda_mean_error: grid.values().iter().copied().zip(errors).collect(),
        chosen_lambda: grid.values()[chosen_index],
        chosen_index,
        fold_sizes: folds.iter().map(Vec::len).collect(),
        fold_assignment_seed: seed,
    })
}
