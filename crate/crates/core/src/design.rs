//! Expression matrices, candidate maps and per-gene regression problems.
//!
//! A [`GeneProblem`] is the unit every estimator and sampler works on: one
//! gene's response vector and the design matrix built from its candidate
//! regulators. Under [`SignConvention::NegatedDesign`] the stored design is the
//! negated regressor expression, so a nonnegative coefficient encodes
//! down-regulation and every fit can be written as `y = X beta + e`.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Named samples x features matrix of expression values.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpressionMatrix {
    sample_ids: Vec<String>,
    feature_ids: Vec<String>,
    values: DMatrix<f64>,
    index: BTreeMap<String, usize>,
}

impl ExpressionMatrix {
    pub fn new(
        sample_ids: Vec<String>,
        feature_ids: Vec<String>,
        values: DMatrix<f64>,
    ) -> Result<Self> {
        if values.nrows() != sample_ids.len() || values.ncols() != feature_ids.len() {
            return Err(Error::InvalidMatrix(format!(
                "values are {}x{} but there are {} sample ids and {} feature ids",
                values.nrows(),
                values.ncols(),
                sample_ids.len(),
                feature_ids.len()
            )));
        }
        let mut seen = HashSet::new();
        for s in &sample_ids {
            if !seen.insert(s.as_str()) {
                return Err(Error::InvalidMatrix(format!("duplicate sample id `{s}`")));
            }
        }
        let mut index = BTreeMap::new();
        for (j, f) in feature_ids.iter().enumerate() {
            if index.insert(f.clone(), j).is_some() {
                return Err(Error::InvalidMatrix(format!("duplicate feature id `{f}`")));
            }
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            let (r, c) = (pos % values.nrows(), pos / values.nrows());
            return Err(Error::InvalidMatrix(format!(
                "non-finite value at sample `{}`, feature `{}`",
                sample_ids[r], feature_ids[c]
            )));
        }
        Ok(Self {
            sample_ids,
            feature_ids,
            values,
            index,
        })
    }

    pub fn sample_ids(&self) -> &[String] {
        &self.sample_ids
    }

    pub fn feature_ids(&self) -> &[String] {
        &self.feature_ids
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn n_samples(&self) -> usize {
        self.sample_ids.len()
    }

    pub fn n_features(&self) -> usize {
        self.feature_ids.len()
    }

    pub fn feature_index(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn contains(&self, id: &str) -> bool {
        self.index.contains_key(id)
    }

    fn column_of(&self, id: &str, matrix: &str) -> Result<DVector<f64>> {
        let j = self.feature_index(id).ok_or_else(|| Error::UnknownFeature {
            matrix: matrix.to_string(),
            id: id.to_string(),
        })?;
        Ok(self.values.column(j).into_owned())
    }

    /// Elementwise negation; feature and sample ids are kept.
    pub fn negated(&self) -> Self {
        Self {
            values: -&self.values,
            ..self.clone()
        }
    }
}

/// Argonaute group paired with an miRNA in a RISC regressor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AgoGroup {
    Ago2,
    /// Combined Argonaute 1, 3 and 4 expression, supplied precomputed.
    Ago134,
}

impl AgoGroup {
    pub const ALL: [AgoGroup; 2] = [AgoGroup::Ago2, AgoGroup::Ago134];

    pub fn feature_id(self) -> &'static str {
        match self {
            AgoGroup::Ago2 => "Ago2",
            AgoGroup::Ago134 => "Ago134",
        }
    }
}

/// Descriptor of one design column.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RegressorLabel {
    Direct(String),
    RiscProduct { mirna: String, ago: AgoGroup },
}

impl RegressorLabel {
    pub fn mirna_id(&self) -> &str {
        match self {
            RegressorLabel::Direct(m) => m,
            RegressorLabel::RiscProduct { mirna, .. } => mirna,
        }
    }
}

impl fmt::Display for RegressorLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RegressorLabel::Direct(m) => f.write_str(m),
            RegressorLabel::RiscProduct { mirna, ago } => {
                write!(f, "{mirna}:{}", ago.feature_id())
            }
        }
    }
}

impl FromStr for RegressorLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.is_empty() {
            return Err(Error::Parameter("empty regressor label".into()));
        }
        if let Some((mirna, suffix)) = s.rsplit_once(':') {
            let ago = match suffix {
                "Ago2" => Some(AgoGroup::Ago2),
                "Ago134" => Some(AgoGroup::Ago134),
                _ => None,
            };
            if let Some(ago) = ago {
                return Ok(RegressorLabel::RiscProduct {
                    mirna: mirna.to_string(),
                    ago,
                });
            }
        }
        Ok(RegressorLabel::Direct(s.to_string()))
    }
}

/// Ordered candidate miRNAs per gene.
///
/// RISC expansion is a property of the interaction model, so the map stores
/// miRNA ids and [`build_problem`] derives the column descriptors.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CandidateMap {
    entries: BTreeMap<String, Vec<String>>,
}

impl CandidateMap {
    pub fn new(entries: BTreeMap<String, Vec<String>>) -> Result<Self> {
        for (gene, mirnas) in &entries {
            if mirnas.is_empty() {
                return Err(Error::InvalidCandidates(format!(
                    "gene `{gene}` has no candidates"
                )));
            }
            let mut seen = HashSet::new();
            for m in mirnas {
                if !seen.insert(m.as_str()) {
                    return Err(Error::InvalidCandidates(format!(
                        "gene `{gene}` lists `{m}` twice"
                    )));
                }
            }
        }
        Ok(Self { entries })
    }

    /// Builds the map from (gene, miRNA) rows, keeping first-seen order per gene.
    pub fn from_pairs<I, G, M>(pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (G, M)>,
        G: Into<String>,
        M: Into<String>,
    {
        let mut entries: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for (g, m) in pairs {
            entries.entry(g.into()).or_default().push(m.into());
        }
        Self::new(entries)
    }

    pub fn genes(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn get(&self, gene: &str) -> Option<&[String]> {
        self.entries.get(gene).map(Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Every (gene, miRNA) pair, sorted by gene then candidate order.
    pub fn pairs(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries
            .iter()
            .flat_map(|(g, ms)| ms.iter().map(move |m| (g.as_str(), m.as_str())))
    }

    pub fn n_pairs(&self) -> usize {
        self.entries.values().map(Vec::len).sum()
    }

    pub fn contains_pair(&self, gene: &str, mirna: &str) -> bool {
        self.entries
            .get(gene)
            .is_some_and(|ms| ms.iter().any(|m| m == mirna))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InteractionModel {
    /// miRNA expression regresses the gene directly.
    DirectA,
    /// Each miRNA enters through its products with Ago2 and Ago134.
    RiscB,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SignConvention {
    /// Stored design is `-X`: a positive coefficient means down-regulation.
    NegatedDesign,
    PlainDesign,
}

/// Centering and scaling applied by [`standardize`].
#[derive(Debug, Clone, PartialEq)]
pub struct Standardization {
    pub y_mean: f64,
    pub x_means: Vec<f64>,
    pub x_scales: Vec<f64>,
}

impl Standardization {
    /// Maps coefficients fitted on the standardized design back to the raw design.
    pub fn to_original_scale(&self, beta: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(
            beta.len(),
            beta.iter().zip(&self.x_scales).map(|(b, s)| b / s),
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneProblem {
    gene_id: String,
    y: DVector<f64>,
    x: DMatrix<f64>,
    labels: Vec<RegressorLabel>,
    sign: SignConvention,
    standardization: Option<Standardization>,
}

impl GeneProblem {
    pub fn new(
        gene_id: impl Into<String>,
        y: DVector<f64>,
        x: DMatrix<f64>,
        labels: Vec<RegressorLabel>,
        sign: SignConvention,
    ) -> Result<Self> {
        if x.nrows() != y.len() {
            return Err(Error::Parameter(format!(
                "design has {} rows but response has {} entries",
                x.nrows(),
                y.len()
            )));
        }
        if x.ncols() != labels.len() {
            return Err(Error::Parameter(format!(
                "design has {} columns but {} labels were given",
                x.ncols(),
                labels.len()
            )));
        }
        Ok(Self {
            gene_id: gene_id.into(),
            y,
            x,
            labels,
            sign,
            standardization: None,
        })
    }

    pub fn gene_id(&self) -> &str {
        &self.gene_id
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn labels(&self) -> &[RegressorLabel] {
        &self.labels
    }

    pub fn sign(&self) -> SignConvention {
        self.sign
    }

    pub fn standardization(&self) -> Option<&Standardization> {
        self.standardization.as_ref()
    }

    pub fn n_samples(&self) -> usize {
        self.y.len()
    }

    pub fn n_regressors(&self) -> usize {
        self.x.ncols()
    }

    /// Restriction to the given sample rows, in the given order.
    pub fn subset_rows(&self, rows: &[usize]) -> Self {
        Self {
            gene_id: self.gene_id.clone(),
            y: self.y.select_rows(rows),
            x: self.x.select_rows(rows),
            labels: self.labels.clone(),
            sign: self.sign,
            standardization: self.standardization.clone(),
        }
    }

    /// Half residual sum of squares `0.5 * ||y - X beta||^2`.
    pub fn half_rss(&self, beta: &DVector<f64>) -> f64 {
        0.5 * (&self.y - &self.x * beta).norm_squared()
    }
}

fn check_alignment(reference: &ExpressionMatrix, other: &ExpressionMatrix, name: &str) -> Result<()> {
    if reference.sample_ids() != other.sample_ids() {
        let detail = reference
            .sample_ids()
            .iter()
            .zip(other.sample_ids())
            .position(|(a, b)| a != b)
            .map(|i| {
                format!(
                    "{name} sample {} is `{}`, expected `{}`",
                    i, other.sample_ids()[i], reference.sample_ids()[i]
                )
            })
            .unwrap_or_else(|| {
                format!(
                    "{name} has {} samples, expected {}",
                    other.n_samples(),
                    reference.n_samples()
                )
            });
        return Err(Error::SampleAlignment(detail));
    }
    Ok(())
}

/// Assembles the regression problem for one gene.
///
/// DirectA uses the candidate miRNA columns; RiscB expands every candidate
/// into `miRNA x Ago2` followed by `miRNA x Ago134`.
pub fn build_problem(
    mrna: &ExpressionMatrix,
    mirna: &ExpressionMatrix,
    ago: Option<&ExpressionMatrix>,
    candidates: &CandidateMap,
    gene_id: &str,
    model: InteractionModel,
    sign: SignConvention,
) -> Result<GeneProblem> {
    check_alignment(mrna, mirna, "mirna")?;
    let y = mrna.column_of(gene_id, "mrna")?;
    let mirnas = candidates.get(gene_id).ok_or_else(|| Error::UnknownFeature {
        matrix: "candidates".into(),
        id: gene_id.to_string(),
    })?;

    let mut columns = Vec::new();
    let mut labels = Vec::new();
    match model {
        InteractionModel::DirectA => {
            for m in mirnas {
                columns.push(mirna.column_of(m, "mirna")?);
                labels.push(RegressorLabel::Direct(m.clone()));
            }
        }
        InteractionModel::RiscB => {
            let ago = ago.ok_or_else(|| Error::UnknownFeature {
                matrix: "ago".into(),
                id: "Ago2".into(),
            })?;
            check_alignment(mrna, ago, "ago")?;
            let ago_cols = AgoGroup::ALL
                .iter()
                .map(|g| ago.column_of(g.feature_id(), "ago"))
                .collect::<Result<Vec<_>>>()?;
            for m in mirnas {
                let mcol = mirna.column_of(m, "mirna")?;
                for (g, acol) in AgoGroup::ALL.iter().zip(&ago_cols) {
                    columns.push(mcol.component_mul(acol));
                    labels.push(RegressorLabel::RiscProduct {
                        mirna: m.clone(),
                        ago: *g,
                    });
                }
            }
        }
    }

    let mut x = DMatrix::from_columns(&columns);
    if sign == SignConvention::NegatedDesign {
        x.neg_mut();
    }
    GeneProblem::new(gene_id, y, x, labels, sign)
}

/// Optionally centers `y` and scales each design column to mean 0, unit sample sd.
pub fn standardize(problem: &GeneProblem, center_y: bool, scale_x: bool) -> Result<GeneProblem> {
    let n = problem.n_samples();
    if n < 2 {
        return Err(Error::Parameter(format!(
            "standardization needs at least 2 samples, got {n}"
        )));
    }
    let mut out = problem.clone();
    let y_mean = if center_y { problem.y.mean() } else { 0.0 };
    out.y.add_scalar_mut(-y_mean);

    let m = problem.n_regressors();
    let mut x_means = vec![0.0; m];
    let mut x_scales = vec![1.0; m];
    if scale_x {
        for j in 0..m {
            let col = problem.x.column(j);
            let mean = col.mean();
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
            let sd = var.sqrt();
            if !(sd > f64::EPSILON * mean.abs().max(1.0)) {
                return Err(Error::DegenerateRegressor {
                    label: problem.labels[j].to_string(),
                });
            }
            out.x.column_mut(j).apply(|v| *v = (*v - mean) / sd);
            x_means[j] = mean;
            x_scales[j] = sd;
        }
    }
    out.standardization = Some(Standardization {
        y_mean,
        x_means,
        x_scales,
    });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(prefix: &str, n: usize) -> Vec<String> {
        (0..n).map(|i| format!("{prefix}{i}")).collect()
    }

    fn toy() -> (ExpressionMatrix, ExpressionMatrix, ExpressionMatrix, CandidateMap) {
        let samples = ids("s", 3);
        let mrna = ExpressionMatrix::new(
            samples.clone(),
            vec!["ACAA2".into(), "G2".into()],
            DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]),
        )
        .unwrap();
        let mirna = ExpressionMatrix::new(
            samples.clone(),
            vec!["miR-124".into(), "miR-1".into()],
            DMatrix::from_row_slice(3, 2, &[0.5, 1.0, 1.5, 2.0, 2.5, 3.0]),
        )
        .unwrap();
        let ago = ExpressionMatrix::new(
            samples,
            vec!["Ago2".into(), "Ago134".into()],
            DMatrix::from_row_slice(3, 2, &[2.0, 1.0, 3.0, 1.0, 4.0, 2.0]),
        )
        .unwrap();
        let cands =
            CandidateMap::from_pairs([("ACAA2", "miR-124"), ("G2", "miR-124"), ("G2", "miR-1")])
                .unwrap();
        (mrna, mirna, ago, cands)
    }

    #[test]
    fn direct_design_is_negated() {
        let (mrna, mirna, _, cands) = toy();
        let p = build_problem(
            &mrna,
            &mirna,
            None,
            &cands,
            "ACAA2",
            InteractionModel::DirectA,
            SignConvention::NegatedDesign,
        )
        .unwrap();
        assert_eq!(p.x().shape(), (3, 1));
        assert_eq!(p.x().column(0).as_slice(), &[-0.5, -1.5, -2.5]);
        assert_eq!(p.y().as_slice(), &[1.0, 3.0, 5.0]);
    }

    #[test]
    fn risc_expansion_orders_ago2_first() {
        let (mrna, mirna, ago, cands) = toy();
        let p = build_problem(
            &mrna,
            &mirna,
            Some(&ago),
            &cands,
            "ACAA2",
            InteractionModel::RiscB,
            SignConvention::PlainDesign,
        )
        .unwrap();
        assert_eq!(p.n_regressors(), 2);
        assert_eq!(p.labels()[0].to_string(), "miR-124:Ago2");
        assert_eq!(p.labels()[1].to_string(), "miR-124:Ago134");
        assert_eq!(p.x().column(0).as_slice(), &[1.0, 4.5, 10.0]);
        assert_eq!(p.x().column(1).as_slice(), &[0.5, 1.5, 5.0]);
    }

    #[test]
    fn negated_design_matches_plain_on_negated_input() {
        let (mrna, mirna, _, cands) = toy();
        let neg = build_problem(
            &mrna, &mirna, None, &cands, "G2",
            InteractionModel::DirectA, SignConvention::NegatedDesign,
        )
        .unwrap();
        let plain = build_problem(
            &mrna, &mirna.negated(), None, &cands, "G2",
            InteractionModel::DirectA, SignConvention::PlainDesign,
        )
        .unwrap();
        assert_eq!(neg.x(), plain.x());
    }

    #[test]
    fn unknown_features_and_alignment() {
        let (mrna, mirna, ago, _) = toy();
        let cands = CandidateMap::from_pairs([("ACAA2", "miR-999")]).unwrap();
        let err = build_problem(
            &mrna, &mirna, None, &cands, "ACAA2",
            InteractionModel::DirectA, SignConvention::NegatedDesign,
        )
        .unwrap_err();
        assert!(err.to_string().contains("unknown feature `miR-999`"));

        let (_, _, _, cands) = toy();
        let err = build_problem(
            &mrna, &mirna, None, &cands, "ACAA2",
            InteractionModel::RiscB, SignConvention::NegatedDesign,
        )
        .unwrap_err();
        assert!(matches!(err, Error::UnknownFeature { .. }));

        let shuffled = ExpressionMatrix::new(
            vec!["s1".into(), "s0".into(), "s2".into()],
            ago.feature_ids().to_vec(),
            ago.values().clone(),
        )
        .unwrap();
        let err = build_problem(
            &mrna, &mirna, Some(&shuffled), &cands, "ACAA2",
            InteractionModel::RiscB, SignConvention::NegatedDesign,
        )
        .unwrap_err();
        assert!(matches!(err, Error::SampleAlignment(_)));
    }

    #[test]
    fn matrix_invariants() {
        assert!(ExpressionMatrix::new(ids("s", 2), ids("f", 1), DMatrix::zeros(2, 2)).is_err());
        assert!(ExpressionMatrix::new(
            vec!["a".into(), "a".into()],
            ids("f", 1),
            DMatrix::zeros(2, 1)
        )
        .is_err());
        assert!(ExpressionMatrix::new(
            ids("s", 1),
            ids("f", 1),
            DMatrix::from_element(1, 1, f64::NAN)
        )
        .is_err());
        assert!(CandidateMap::from_pairs([("g", "m"), ("g", "m")]).is_err());
    }

    #[test]
    fn label_round_trip() {
        for s in ["miR-1", "miR-1:Ago2", "miR-1:Ago134", "odd:name"] {
            let l: RegressorLabel = s.parse().unwrap();
            assert_eq!(l.to_string(), s);
        }
    }

    fn single(y: &[f64], x: &[f64]) -> GeneProblem {
        GeneProblem::new(
            "g",
            DVector::from_column_slice(y),
            DMatrix::from_column_slice(x.len(), 1, x),
            vec![RegressorLabel::Direct("m".into())],
            SignConvention::PlainDesign,
        )
        .unwrap()
    }

    #[test]
    fn standardize_examples() {
        let p = single(&[1.0, 2.0, 3.0], &[0.0, 1.0, 2.0]);
        let s = standardize(&p, true, true).unwrap();
        assert_eq!(s.y().as_slice(), &[-1.0, 0.0, 1.0]);
        assert_eq!(s.x().column(0).as_slice(), &[-1.0, 0.0, 1.0]);
        let st = s.standardization().unwrap();
        assert_eq!(st.y_mean, 2.0);
        assert_eq!(st.x_scales, vec![1.0]);

        let p = single(&[1.0, 2.0, 3.0], &[2.0, 2.0, 2.0]);
        let err = standardize(&p, false, true).unwrap_err();
        assert_eq!(
            err,
            Error::DegenerateRegressor {
                label: "m".into()
            }
        );
        assert!(standardize(&p, true, false).is_ok());
    }
}
