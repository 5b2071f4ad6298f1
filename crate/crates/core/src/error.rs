use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("unknown feature `{id}` in {matrix} matrix")]
    UnknownFeature { matrix: String, id: String },

    #[error("sample alignment: {0}")]
    SampleAlignment(String),

    #[error("invalid expression matrix: {0}")]
    InvalidMatrix(String),

    #[error("invalid candidate map: {0}")]
    InvalidCandidates(String),

    #[error("degenerate regressor `{label}`: zero variance column")]
    DegenerateRegressor { label: String },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("not applicable: singular normal equations ({n} samples, {m} regressors)")]
    SingularNormalEquations { n: usize, m: usize },

    #[error("singular precision: X^T X is not positive definite; reduce the candidate set")]
    SingularPrecision,

    #[error("precision factorization failed: matrix is not symmetric positive definite")]
    FactorizationFailed,

    #[error("empty truncation interval at coordinate {coordinate}")]
    EmptyTruncation { coordinate: usize },

    #[error("non-finite draw at iteration {iteration}")]
    NonFiniteDraw { iteration: usize },

    #[error("fit failed in fold {fold} at lambda {lambda}: {source}")]
    FoldFit {
        fold: usize,
        lambda: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("gene `{gene}`: {source}")]
    Gene {
        gene: String,
        #[source]
        source: Box<Error>,
    },

    #[error("validated pairs outside candidate universe: {}", format_pairs(.0))]
    ValidatedOutsideUniverse(Vec<(String, String)>),

    #[error("empty validated set: true positive rate is undefined")]
    EmptyValidated,
}

fn format_pairs(pairs: &[(String, String)]) -> String {
    pairs
        .iter()
        .map(|(g, r)| format!("{g}/{r}"))
        .collect::<Vec<_>>()
        .join(", ")
}

impl Error {
    /// True for failures that come from the numerics rather than from bad input.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::FoldFit { source, .. } | Error::Gene { source, .. } => source.is_numerical(),
            e => matches!(
                e,
                Error::SingularNormalEquations { .. }
                    | Error::SingularPrecision
                    | Error::FactorizationFailed
                    | Error::EmptyTruncation { .. }
                    | Error::NonFiniteDraw { .. }
            ),
        }
    }

    pub(crate) fn for_gene(self, gene: &str) -> Self {
        Error::Gene {
            gene: gene.to_string(),
            source: Box::new(self),
        }
    }
}
