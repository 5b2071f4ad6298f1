//! Whole-dataset runs: one regression problem per gene, fitted or sampled
//! independently under an [`Execution`] strategy.

use crate::crossval::{cv_select_lambda, CvResult, LambdaGrid};
use crate::design::{build_problem, CandidateMap, ExpressionMatrix, GeneProblem, InteractionModel, SignConvention};
use crate::error::{Error, Result};
use crate::execution::Execution;
use crate::point_estimators::{fit_point, PointFit, PointMethod};
use crate::samplers::{derive_seed, sample_replicates, BayesMethod, PosteriorChain, SamplerConfig};
use crate::selection::{select_gene, AciReport};

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub mrna: ExpressionMatrix,
    pub mirna: ExpressionMatrix,
    pub ago: Option<ExpressionMatrix>,
    pub candidates: CandidateMap,
    pub model: InteractionModel,
    pub sign: SignConvention,
}

impl Dataset {
    /// Problems for every gene in the candidate map, in gene-id order.
    pub fn problems(&self) -> Result<Vec<GeneProblem>> {
        self.candidates
            .genes()
            .map(|g| {
                build_problem(
                    &self.mrna,
                    &self.mirna,
                    self.ago.as_ref(),
                    &self.candidates,
                    g,
                    self.model,
                    self.sign,
                )
                .map_err(|e| e.for_gene(g))
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Penalty {
    Fixed(f64),
    CrossValidated { grid: LambdaGrid, k: usize, seed: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneFit {
    pub fit: PointFit,
    pub cv: Option<CvResult>,
}

/// Fits every problem; cross-validation, when requested, runs per gene with
/// the same fold seed. The grid itself is searched sequentially inside each gene.
pub fn fit_all(
    problems: &[GeneProblem],
    method: PointMethod,
    penalty: &Penalty,
    execution: Execution,
) -> Result<Vec<GeneFit>> {
    execution.try_map(problems, |p| {
        let out = match penalty {
            Penalty::Fixed(lambda) => fit_point(p, method, *lambda).map(|fit| GeneFit { fit, cv: None }),
            Penalty::CrossValidated { grid, k, seed } => {
                cv_select_lambda(p, method, grid, *k, *seed, Execution::Sequential).and_then(|cv| {
                    Ok(GeneFit {
                        fit: fit_point(p, method, cv.chosen_lambda)?,
                        cv: Some(cv),
                    })
                })
            }
        };
        out.map_err(|e| e.for_gene(p.gene_id()))
    })
}

/// Samples one pooled chain per gene. Gene `i` uses seed `derive_seed(cfg.seed, i)`,
/// so results do not depend on the execution strategy.
pub fn sample_all(
    problems: &[GeneProblem],
    method: BayesMethod,
    cfg: &SamplerConfig,
    replicates: usize,
    execution: Execution,
) -> Result<Vec<PosteriorChain>> {
    cfg.validate()?;
    let indexed: Vec<(u64, &GeneProblem)> = problems.iter().enumerate().map(|(i, p)| (i as u64, p)).collect();
    execution.try_map(&indexed, |&(i, p)| {
        let gene_cfg = SamplerConfig {
            seed: derive_seed(cfg.seed, i),
            ..cfg.clone()
        };
        sample_replicates(p, method, &gene_cfg, replicates).map_err(|e| e.for_gene(p.gene_id()))
    })
}

pub fn select_all(
    chains: &[PosteriorChain],
    tau: f64,
    alpha: f64,
    execution: Execution,
) -> Result<Vec<(String, Vec<AciReport>)>> {
    execution.try_map(chains, |c| {
        select_gene(c, tau, alpha)
            .map(|r| (c.gene_id.clone(), r))
            .map_err(|e: Error| e.for_gene(&c.gene_id))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluation::{generate_synthetic, SyntheticSpec};

    fn dataset() -> Dataset {
        let d = generate_synthetic(&SyntheticSpec {
            n_genes: 6,
            n_samples: 30,
            ..SyntheticSpec::default()
        })
        .unwrap();
        Dataset {
            mrna: d.mrna,
            mirna: d.mirna,
            ago: d.ago,
            candidates: d.candidates,
            model: InteractionModel::DirectA,
            sign: SignConvention::NegatedDesign,
        }
    }

    #[test]
    fn execution_strategy_does_not_change_results() {
        let problems = dataset().problems().unwrap();
        assert_eq!(problems.len(), 6);
        let pen = Penalty::CrossValidated {
            grid: LambdaGrid::new(2.0, 2, 2).unwrap(),
            k: 5,
            seed: 1,
        };
        let a = fit_all(&problems, PointMethod::NLasso, &pen, Execution::Sequential).unwrap();
        let b = fit_all(&problems, PointMethod::NLasso, &pen, Execution::Parallel).unwrap();
        assert_eq!(a, b);
        assert!(a.iter().all(|g| g.cv.as_ref().unwrap().fold_sizes == vec![6; 5]));

        let cfg = SamplerConfig {
            n_samples: 60,
            burn_in: 20,
            ..SamplerConfig::with_seed(9)
        };
        let c1 = sample_all(&problems, BayesMethod::NBlasso, &cfg, 2, Execution::Sequential).unwrap();
        let c2 = sample_all(&problems, BayesMethod::NBlasso, &cfg, 2, Execution::Parallel).unwrap();
        assert_eq!(c1, c2);
        assert_eq!(c1[0].n_draws(), 120);
        assert_ne!(c1[0].beta_draws, c1[1].beta_draws);
        let s = select_all(&c1, 0.05, 0.05, Execution::Parallel).unwrap();
        assert_eq!(s.len(), 6);
        assert_eq!(s[0].0, c1[0].gene_id);
    }

    #[test]
    fn errors_name_the_gene() {
        let problems = dataset().problems().unwrap();
        let err = fit_all(&problems, PointMethod::Ridge, &Penalty::Fixed(-1.0), Execution::Parallel).unwrap_err();
        assert!(err.to_string().starts_with("gene `G"), "{err}");
    }
}
