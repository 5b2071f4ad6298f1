//! Sparse regression for inferring down-regulatory miRNA-mRNA interactions.
//!
//! Point estimators (least squares, ridge, LASSO, non-negative LASSO), Gibbs
//! samplers for the Bayesian LASSO and its non-negative variant, active
//! credible interval selection, cross-validated penalty selection and ROC
//! evaluation against validated interaction lists.
//!
//! Per-gene work is independent; [`execution::Execution`] runs it on a rayon
//! pool when the `parallel` feature is enabled and sequentially otherwise.

pub mod batch;
pub mod crossval;
pub mod design;
pub mod error;
pub mod evaluation;
pub mod execution;
mod linalg;
pub mod point_estimators;
pub mod samplers;
pub mod selection;

pub use design::{
    build_problem, standardize, AgoGroup, CandidateMap, ExpressionMatrix, GeneProblem, InteractionModel,
    RegressorLabel, SignConvention, Standardization,
};
pub use error::{Error, Result};
pub use execution::Execution;
pub use point_estimators::{
    fit_lasso, fit_lsr, fit_nlasso, fit_ridge, select_by_threshold, LassoConfig, PointFit, PointMethod,
};
pub use samplers::{
    sample_blasso, sample_nblasso, sample_truncated_mvn, BayesMethod, PosteriorChain, SamplerConfig,
};
pub use selection::{compute_aci, select_gene, AciReport};
