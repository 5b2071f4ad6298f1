//! Gibbs samplers for the Bayesian LASSO and its non-negative variant.

pub mod diagnostics;
pub mod truncated;

mod blasso;
mod nblasso;

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::design::{GeneProblem, RegressorLabel};
use crate::error::{Error, Result};

pub use blasso::sample_blasso;
pub use nblasso::sample_nblasso;
pub use truncated::sample_truncated_mvn;

/// Random generator used by every chain. Seeded explicitly, never global.
pub type ChainRng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BayesMethod {
    Blasso,
    NBlasso,
}

impl BayesMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            BayesMethod::Blasso => "blasso",
            BayesMethod::NBlasso => "nblasso",
        }
    }
}

impl fmt::Display for BayesMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BayesMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "blasso" => Ok(BayesMethod::Blasso),
            "nblasso" => Ok(BayesMethod::NBlasso),
            other => Err(Error::Parameter(format!("unknown Bayesian method `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplerConfig {
    /// Iterations kept after burn-in (before thinning).
    pub n_samples: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub seed: u64,
    /// Shape of the Gamma prior on the shrinkage parameters.
    pub alpha_lambda0: f64,
    /// Scale of the Gamma prior on the shrinkage parameters.
    pub beta_lambda0: f64,
    /// Holds the noise variance at this value instead of sampling it.
    pub fixed_sigma2: Option<f64>,
    /// Holds the shrinkage draw (per-coefficient lambda for nBLASSO, lambda^2
    /// for BLASSO) at this value instead of sampling it.
    pub fixed_lambda: Option<f64>,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            n_samples: 5_000,
            burn_in: 2_000,
            thin: 1,
            seed: 0,
            alpha_lambda0: 1e-6,
            beta_lambda0: 1e6,
            fixed_sigma2: None,
            fixed_lambda: None,
        }
    }
}

impl SamplerConfig {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }

    /// Number of retained draws.
    pub fn retained(&self) -> usize {
        self.n_samples / self.thin.max(1)
    }

    pub fn validate(&self) -> Result<()> {
        if self.thin == 0 {
            return Err(Error::Parameter("thin must be at least 1".into()));
        }
        if self.retained() == 0 {
            return Err(Error::Parameter(format!(
                "n_samples {} with thin {} retains no draws",
                self.n_samples, self.thin
            )));
        }
        for (name, v) in [("alpha_lambda0", self.alpha_lambda0), ("beta_lambda0", self.beta_lambda0)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Parameter(format!("{name} must be positive, got {v}")));
            }
        }
        for (name, v) in [("fixed_sigma2", self.fixed_sigma2), ("fixed_lambda", self.fixed_lambda)] {
            if let Some(v) = v {
                if !(v > 0.0) || !v.is_finite() {
                    return Err(Error::Parameter(format!("{name} must be positive, got {v}")));
                }
            }
        }
        Ok(())
    }

    pub(crate) fn rng(&self) -> ChainRng {
        rand::SeedableRng::seed_from_u64(self.seed)
    }
}

/// Mixes a base seed with a stream index (splitmix64 finalizer).
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    let mut z = base ^ stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Retained Gibbs draws, one row per kept iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorChain {
    pub gene_id: String,
    pub method: BayesMethod,
    pub labels: Vec<RegressorLabel>,
    pub beta_draws: DMatrix<f64>,
    pub sigma2_draws: DVector<f64>,
    /// Per-coefficient lambda for nBLASSO; the global lambda^2 repeated across
    /// columns for BLASSO.
    pub lambda_draws: DMatrix<f64>,
    pub seed: u64,
}

impl PosteriorChain {
    pub fn n_draws(&self) -> usize {
        self.beta_draws.nrows()
    }

    pub fn n_regressors(&self) -> usize {
        self.beta_draws.ncols()
    }

    pub fn beta_column(&self, j: usize) -> Vec<f64> {
        self.beta_draws.column(j).iter().copied().collect()
    }

    /// Stacks replicate chains of the same gene and method.
    pub fn concat(chains: &[PosteriorChain]) -> Result<PosteriorChain> {
        let first = chains
            .first()
            .ok_or_else(|| Error::Parameter("no chains to concatenate".into()))?;
        if chains
            .iter()
            .any(|c| c.labels != first.labels || c.method != first.method || c.gene_id != first.gene_id)
        {
            return Err(Error::Parameter("chains describe different problems".into()));
        }
        let t: usize = chains.iter().map(PosteriorChain::n_draws).sum();
        let m = first.n_regressors();
        let mut beta = DMatrix::zeros(t, m);
        let mut lambda = DMatrix::zeros(t, m);
        let mut sigma2 = DVector::zeros(t);
        let mut row = 0;
        for c in chains {
            let k = c.n_draws();
            beta.rows_mut(row, k).copy_from(&c.beta_draws);
            lambda.rows_mut(row, k).copy_from(&c.lambda_draws);
            sigma2.rows_mut(row, k).copy_from(&c.sigma2_draws);
            row += k;
        }
        Ok(PosteriorChain {
            gene_id: first.gene_id.clone(),
            method: first.method,
            labels: first.labels.clone(),
            beta_draws: beta,
            sigma2_draws: sigma2,
            lambda_draws: lambda,
            seed: first.seed,
        })
    }
}

pub fn sample(problem: &GeneProblem, method: BayesMethod, cfg: &SamplerConfig) -> Result<PosteriorChain> {
    match method {
        BayesMethod::Blasso => sample_blasso(problem, cfg),
        BayesMethod::NBlasso => sample_nblasso(problem, cfg),
    }
}

/// Runs `replicates` independent chains with seeds derived from `cfg.seed`
/// and pools their draws.
pub fn sample_replicates(
    problem: &GeneProblem,
    method: BayesMethod,
    cfg: &SamplerConfig,
    replicates: usize,
) -> Result<PosteriorChain> {
    if replicates <= 1 {
        return sample(problem, method, cfg);
    }
    let chains = (0..replicates as u64)
        .map(|r| {
            let c = SamplerConfig {
                seed: derive_seed(cfg.seed, r),
                ..cfg.clone()
            };
            sample(problem, method, &c)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut pooled = PosteriorChain::concat(&chains)?;
    pooled.seed = cfg.seed;
    Ok(pooled)
}

/// Accumulates kept iterations after burn-in and thinning.
pub(crate) struct ChainRecorder {
    burn_in: usize,
    thin: usize,
    beta: DMatrix<f64>,
    sigma2: DVector<f64>,
    lambda: DMatrix<f64>,
    row: usize,
}

impl ChainRecorder {
    pub(crate) fn new(cfg: &SamplerConfig, m: usize) -> Self {
        let t = cfg.retained();
        Self {
            burn_in: cfg.burn_in,
            thin: cfg.thin,
            beta: DMatrix::zeros(t, m),
            sigma2: DVector::zeros(t),
            lambda: DMatrix::zeros(t, m),
            row: 0,
        }
    }

    pub(crate) fn total_iterations(cfg: &SamplerConfig) -> usize {
        cfg.burn_in + cfg.retained() * cfg.thin
    }

    pub(crate) fn record(&mut self, iteration: usize, beta: &DVector<f64>, sigma2: f64, lambda: &DVector<f64>) {
        if iteration < self.burn_in || (iteration - self.burn_in + 1) % self.thin != 0 {
            return;
        }
        if self.row >= self.sigma2.len() {
            return;
        }
        self.beta.row_mut(self.row).copy_from(&beta.transpose());
        self.lambda.row_mut(self.row).copy_from(&lambda.transpose());
        self.sigma2[self.row] = sigma2;
        self.row += 1;
    }

    pub(crate) fn finish(self, problem: &GeneProblem, method: BayesMethod, seed: u64) -> PosteriorChain {
        PosteriorChain {
            gene_id: problem.gene_id().to_string(),
            method,
            labels: problem.labels().to_vec(),
            beta_draws: self.beta,
            sigma2_draws: self.sigma2,
            lambda_draws: self.lambda,
            seed,
        }
    }
}

/// Sample variance of `y`, falling back to 1 for constant responses.
pub(crate) fn initial_sigma2(y: &DVector<f64>) -> f64 {
    let n = y.len();
    if n < 2 {
        return 1.0;
    }
    let mean = y.mean();
    let var = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
    if var > 0.0 && var.is_finite() {
        var
    } else {
        1.0
    }
}

pub(crate) fn check_finite(iteration: usize, values: impl IntoIterator<Item = f64>) -> Result<()> {
    if values.into_iter().all(f64::is_finite) {
        Ok(())
    } else {
        Err(Error::NonFiniteDraw { iteration })
    }
}

/// Inverse-Gaussian draw (Michael, Schucany and Haas transformation).
///
/// The smaller root is computed in a cancellation-free form so that tiny
/// shape parameters stay accurate.
pub fn sample_inverse_gaussian<R: Rng + ?Sized>(mean: f64, shape: f64, rng: &mut R) -> f64 {
    let nu: f64 = StandardNormal.sample(rng);
    let w = mean * nu * nu / shape;
    let root = mean / (1.0 + 0.5 * w + (w + 0.25 * w * w).sqrt());
    let u: f64 = rng.random();
    if u <= mean / (mean + root) {
        root
    } else {
        mean * mean / root
    }
}
