//! ROC curves, partial AUC and validated-hit counts over the candidate
//! universe, plus a seeded synthetic benchmark generator.
//!
//! Predictions are scored per (gene, miRNA) pair. Under the RISC model an
//! miRNA owns two design columns; the pair's score is the larger of the two.

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample as sample_indices;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::design::{AgoGroup, CandidateMap, ExpressionMatrix, InteractionModel};
use crate::error::{Error, Result};
use crate::point_estimators::PointFit;
use crate::selection::AciReport;

/// Right end of the false-positive range used for partial AUC.
pub const PARTIAL_AUC_MAX_FPR: f64 = 0.1;

pub type Pair = (String, String);

/// Experimentally validated (gene, miRNA) pairs, restricted to the candidate universe.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidatedSet {
    pairs: BTreeSet<Pair>,
}

impl ValidatedSet {
    /// Rejects every pair that is not a candidate, listing all offenders.
    pub fn new<I>(pairs: I, universe: &CandidateMap) -> Result<Self>
    where
        I: IntoIterator<Item = Pair>,
    {
        let pairs: BTreeSet<Pair> = pairs.into_iter().collect();
        let offenders: Vec<Pair> = pairs
            .iter()
            .filter(|(g, m)| !universe.contains_pair(g, m))
            .cloned()
            .collect();
        if !offenders.is_empty() {
            return Err(Error::ValidatedOutsideUniverse(offenders));
        }
        Ok(Self { pairs })
    }

    pub fn pairs(&self) -> &BTreeSet<Pair> {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn contains(&self, gene: &str, mirna: &str) -> bool {
        self.pairs.contains(&(gene.to_string(), mirna.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RocPoint {
    /// Threshold or significance level that produced the point.
    pub ladder: f64,
    pub fpr: f64,
    pub tpr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RocCurve {
    /// Sorted by FPR, then TPR.
    pub points: Vec<RocPoint>,
    pub partial_auc: f64,
}

/// `{0} U {1e-8..1e-4} U {k 1e-3, k 1e-2, k 1e-1 : k = 1..9} U {1}`.
pub fn default_threshold_ladder() -> Vec<f64> {
    let mut ladder = vec![0.0];
    ladder.extend((-8..=-4).map(|e| 10f64.powi(e)));
    for e in [-3, -2, -1] {
        ladder.extend((1..=9).map(|k| k as f64 * 10f64.powi(e)));
    }
    ladder.push(1.0);
    ladder
}

/// `0.01, 0.02, ..., 0.90`.
pub fn default_alpha_ladder() -> Vec<f64> {
    (1..=90).map(|k| k as f64 / 100.0).collect()
}

/// Trapezoid area under `(fpr, tpr)` points for FPR in `[0, max_fpr]`.
///
/// Points are deduplicated by FPR keeping the largest TPR, and the curve is
/// anchored at the origin. Beyond the last point the curve is held flat.
pub fn partial_auc(points: &[(f64, f64)], max_fpr: f64) -> f64 {
    let mut best: BTreeMap<u64, (f64, f64)> = BTreeMap::new();
    best.insert(0f64.to_bits(), (0.0, 0.0));
    for &(fpr, tpr) in points {
        let fpr = fpr.max(0.0);
        let e = best.entry(fpr.to_bits()).or_insert((fpr, tpr));
        e.1 = e.1.max(tpr);
    }
    // nonnegative floats order the same as their bit patterns
    let curve: Vec<(f64, f64)> = best.into_values().collect();
    let mut area = 0.0;
    for w in curve.windows(2) {
        let ((x0, y0), (x1, y1)) = (w[0], w[1]);
        if x0 >= max_fpr {
            break;
        }
        if x1 <= max_fpr {
            area += 0.5 * (y0 + y1) * (x1 - x0);
        } else {
            let y_cut = y0 + (y1 - y0) * (max_fpr - x0) / (x1 - x0);
            area += 0.5 * (y0 + y_cut) * (max_fpr - x0);
        }
    }
    let &(x_last, y_last) = curve.last().expect("origin is always present");
    if x_last < max_fpr {
        area += y_last * (max_fpr - x_last);
    }
    area
}

/// ROC over `ladder`: a pair is predicted when its score exceeds the ladder value.
pub fn roc_from_scores(
    scores: &BTreeMap<Pair, f64>,
    universe: &CandidateMap,
    validated: &ValidatedSet,
    ladder: &[f64],
) -> Result<RocCurve> {
    if validated.is_empty() {
        return Err(Error::EmptyValidated);
    }
    let positives = validated.len() as f64;
    let negatives = (universe.n_pairs() - validated.len()) as f64;
    let scored: Vec<(bool, f64)> = universe
        .pairs()
        .map(|(g, m)| {
            let key = (g.to_string(), m.to_string());
            let s = scores.get(&key).copied().unwrap_or(f64::NEG_INFINITY);
            (validated.pairs.contains(&key), s)
        })
        .collect();

    let mut points: Vec<RocPoint> = ladder
        .iter()
        .map(|&t| {
            let (mut tp, mut fp) = (0usize, 0usize);
            for &(is_valid, s) in &scored {
                if s > t {
                    if is_valid {
                        tp += 1;
                    } else {
                        fp += 1;
                    }
                }
            }
            RocPoint {
                ladder: t,
                fpr: if negatives > 0.0 { fp as f64 / negatives } else { 0.0 },
                tpr: tp as f64 / positives,
            }
        })
        .collect();
    points.sort_by(|a, b| a.fpr.total_cmp(&b.fpr).then(a.tpr.total_cmp(&b.tpr)));
    let xy: Vec<(f64, f64)> = points.iter().map(|p| (p.fpr, p.tpr)).collect();
    Ok(RocCurve {
        partial_auc: partial_auc(&xy, PARTIAL_AUC_MAX_FPR),
        points,
    })
}

/// Per-pair score from point fits: the largest coefficient among the pair's columns.
pub fn point_scores(fits: &[PointFit]) -> BTreeMap<Pair, f64> {
    let mut scores = BTreeMap::new();
    for fit in fits {
        for (label, &b) in fit.labels.iter().zip(fit.beta.iter()) {
            let e = scores
                .entry((fit.gene_id.clone(), label.mirna_id().to_string()))
                .or_insert(f64::NEG_INFINITY);
            *e = f64::max(*e, b);
        }
    }
    scores
}

/// Per-pair score from ACI reports: the largest significance among the pair's columns.
pub fn bayesian_scores(reports: &[(String, Vec<AciReport>)]) -> BTreeMap<Pair, f64> {
    let mut scores = BTreeMap::new();
    for (gene, rs) in reports {
        for r in rs {
            let s = if r.interval.is_some() { r.significance } else { 0.0 };
            let e = scores
                .entry((gene.clone(), r.regressor_label.mirna_id().to_string()))
                .or_insert(0.0);
            *e = f64::max(*e, s);
        }
    }
    scores
}

pub fn roc_point_estimator(
    fits: &[PointFit],
    universe: &CandidateMap,
    validated: &ValidatedSet,
    thresholds: &[f64],
) -> Result<RocCurve> {
    roc_from_scores(&point_scores(fits), universe, validated, thresholds)
}

/// ROC across significance levels; each pair is predicted when its ACI exists
/// and its significance exceeds alpha.
pub fn roc_bayesian(
    reports: &[(String, Vec<AciReport>)],
    universe: &CandidateMap,
    validated: &ValidatedSet,
    alphas: &[f64],
) -> Result<RocCurve> {
    roc_from_scores(&bayesian_scores(reports), universe, validated, alphas)
}

/// Pairs predicted at one operating point.
pub fn predicted_pairs(scores: &BTreeMap<Pair, f64>, cutoff: f64) -> BTreeSet<Pair> {
    scores
        .iter()
        .filter(|(_, &s)| s > cutoff)
        .map(|(k, _)| k.clone())
        .collect()
}

pub fn count_validated_hits(selected: &BTreeSet<Pair>, validated: &ValidatedSet) -> usize {
    selected.intersection(&validated.pairs).count()
}

/// Parameters of the synthetic benchmark.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub n_samples: usize,
    pub n_genes: usize,
    pub n_mirnas: usize,
    pub candidates_per_gene: usize,
    pub active_per_gene: usize,
    pub effect_size: f64,
    pub noise_sd: f64,
    pub model: InteractionModel,
    pub seed: u64,
    /// Mean Argonaute level; Ago2 and Ago134 fluctuate around it.
    pub ago_baseline: f64,
    /// Correlation between the Ago2 and Ago134 fluctuations.
    pub ago_correlation: f64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            n_samples: 60,
            n_genes: 40,
            n_mirnas: 30,
            candidates_per_gene: 8,
            active_per_gene: 2,
            effect_size: 1.0,
            noise_sd: 0.5,
            model: InteractionModel::DirectA,
            seed: 0,
            ago_baseline: 3.0,
            ago_correlation: -0.8,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Parameter(msg));
        if self.n_samples < 2 || self.n_genes == 0 || self.n_mirnas == 0 {
            return fail("need at least 2 samples, 1 gene and 1 miRNA".into());
        }
        if self.candidates_per_gene == 0 || self.candidates_per_gene > self.n_mirnas {
            return fail(format!(
                "candidates_per_gene must be in 1..={} (got {})",
                self.n_mirnas, self.candidates_per_gene
            ));
        }
        if self.active_per_gene > self.candidates_per_gene {
            return fail(format!(
                "active_per_gene {} exceeds candidates_per_gene {}",
                self.active_per_gene, self.candidates_per_gene
            ));
        }
        if !(self.effect_size >= 0.0) || !self.effect_size.is_finite() {
            return fail(format!("effect_size must be nonnegative, got {}", self.effect_size));
        }
        if !(self.noise_sd >= 0.0) || !self.noise_sd.is_finite() {
            return fail(format!("noise_sd must be nonnegative, got {}", self.noise_sd));
        }
        if !(self.ago_correlation.abs() <= 1.0) || !self.ago_baseline.is_finite() {
            return fail("ago_correlation must lie in [-1, 1]".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticData {
    pub mrna: ExpressionMatrix,
    pub mirna: ExpressionMatrix,
    pub ago: Option<ExpressionMatrix>,
    pub candidates: CandidateMap,
    pub truth: ValidatedSet,
    /// Planted coefficient per design column label, for the active columns.
    pub planted: BTreeMap<(String, String), f64>,
}

pub fn sample_id(i: usize) -> String {
    format!("S{:03}", i + 1)
}

pub fn gene_id(i: usize) -> String {
    format!("G{:03}", i + 1)
}

pub fn mirna_id(i: usize) -> String {
    format!("miR-{:03}", i + 1)
}

/// Seeded synthetic expression data with planted down-regulation.
///
/// miRNA levels are standard normal. Each gene draws a candidate subset and
/// an active subset within it; `y = -X_active * effect + noise`. Under the
/// RISC model an active miRNA contributes both of its product columns.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<SyntheticData> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n = spec.n_samples;
    let samples: Vec<String> = (0..n).map(sample_id).collect();

    let mirna_values = DMatrix::from_fn(spec.n_mirnas, n, |_, _| rng.sample::<f64, _>(StandardNormal)).transpose();
    let mirna = ExpressionMatrix::new(samples.clone(), (0..spec.n_mirnas).map(mirna_id).collect(), mirna_values)?;

    let ago = match spec.model {
        InteractionModel::DirectA => None,
        InteractionModel::RiscB => {
            let rho = spec.ago_correlation;
            let resid = (1.0 - rho * rho).max(0.0).sqrt();
            let mut values = DMatrix::zeros(n, 2);
            for i in 0..n {
                let z1: f64 = rng.sample(StandardNormal);
                let z2: f64 = rng.sample(StandardNormal);
                values[(i, 0)] = spec.ago_baseline + z1;
                values[(i, 1)] = spec.ago_baseline + rho * z1 + resid * z2;
            }
            let ids = AgoGroup::ALL.iter().map(|g| g.feature_id().to_string()).collect();
            Some(ExpressionMatrix::new(samples.clone(), ids, values)?)
        }
    };

    let mut candidates = BTreeMap::new();
    let mut truth = BTreeSet::new();
    let mut planted = BTreeMap::new();
    let mut mrna_values = DMatrix::zeros(n, spec.n_genes);
    for g in 0..spec.n_genes {
        let gid = gene_id(g);
        let mut cand = sample_indices(&mut rng, spec.n_mirnas, spec.candidates_per_gene).into_vec();
        cand.sort_unstable();
        let active = sample_indices(&mut rng, cand.len(), spec.active_per_gene).into_vec();

        let mut y = DVector::zeros(n);
        for &a in &active {
            let m = cand[a];
            let mcol = mirna.values().column(m);
            let columns: Vec<(DVector<f64>, String)> = match &ago {
                Some(ago) => AgoGroup::ALL
                    .iter()
                    .enumerate()
                    .map(|(k, group)| {
                        let label = format!("{}:{}", mirna_id(m), group.feature_id());
                        (mcol.component_mul(&ago.values().column(k)), label)
                    })
                    .collect(),
                None => vec![(mcol.into_owned(), mirna_id(m))],
            };
            if spec.effect_size > 0.0 {
                truth.insert((gid.clone(), mirna_id(m)));
                for (column, label) in columns {
                    y -= spec.effect_size * column;
                    planted.insert((gid.clone(), label), spec.effect_size);
                }
            }
        }
        for i in 0..n {
            y[i] += spec.noise_sd * rng.sample::<f64, _>(StandardNormal);
        }
        mrna_values.set_column(g, &y);
        candidates.insert(gid, cand.iter().map(|&m| mirna_id(m)).collect());
    }

    let candidates = CandidateMap::new(candidates)?;
    let mrna = ExpressionMatrix::new(samples, (0..spec.n_genes).map(gene_id).collect(), mrna_values)?;
    let truth = ValidatedSet::new(truth, &candidates)?;
    Ok(SyntheticData {
        mrna,
        mirna,
        ago,
        candidates,
        truth,
        planted,
    })
}
