//! Active credible interval (ACI) selection from posterior draws.
//!
//! For one coefficient the draws are split into two clusters by 1-D k-means.
//! A `100(1 - tau)%` order-statistic interval `[a, b]` is taken on the
//! higher-mean cluster; when `a > 0` it is the ACI, and its significance is
//! the fraction of *all* draws falling inside it. The coefficient is selected
//! when the significance exceeds `alpha`.

use crate::design::RegressorLabel;
use crate::error::{Error, Result};
use crate::samplers::PosteriorChain;

/// Minimum chain length accepted by [`compute_aci`].
pub const MIN_DRAWS: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct AciReport {
    pub regressor_label: RegressorLabel,
    /// `(a, b)` with `0 < a <= b`; absent when the upper cluster's lower bound is not positive.
    pub interval: Option<(f64, f64)>,
    /// `Q / T`: draws inside the interval over all draws. Zero without an interval.
    pub significance: f64,
    pub selected: bool,
    /// Cluster means `(m1, m2)` with `m1 <= m2`; `None` when clustering degenerates.
    pub cluster_means: Option<(f64, f64)>,
    /// Size `t` of the upper cluster.
    pub cluster2_size: usize,
    pub n_draws: usize,
}

impl AciReport {
    /// Selection decision at another significance level, without recomputing the interval.
    pub fn selected_at(&self, alpha: f64) -> bool {
        self.interval.is_some() && self.significance > alpha
    }

    pub fn with_alpha(&self, alpha: f64) -> Self {
        Self {
            selected: self.selected_at(alpha),
            ..self.clone()
        }
    }
}

/// Two-cluster partition of sorted 1-D data: the upper cluster is `sorted[split..]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoMeans {
    pub split: usize,
    pub lower_mean: f64,
    pub upper_mean: f64,
}

/// Lloyd's algorithm with centers initialized at the minimum and maximum.
///
/// `sorted` must be ascending. Points equidistant from both centers join the
/// lower cluster. Returns `None` when all values coincide or a cluster empties.
pub fn two_means_sorted(sorted: &[f64]) -> Option<TwoMeans> {
    let (&lo, &hi) = (sorted.first()?, sorted.last()?);
    if !(lo < hi) {
        return None;
    }
    let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
    let (mut c1, mut c2) = (lo, hi);
    let mut split = usize::MAX;
    loop {
        // clusters are contiguous in sorted order
        let next = sorted.partition_point(|&x| (x - c2).abs() >= (x - c1).abs());
        if next == 0 || next == sorted.len() {
            return None;
        }
        if next == split {
            break;
        }
        split = next;
        c1 = mean(&sorted[..split]);
        c2 = mean(&sorted[split..]);
    }
    Some(TwoMeans {
        split,
        lower_mean: c1,
        upper_mean: c2,
    })
}

/// 1-based order-statistic index `[x] + 1`, or `x` itself when `x` is an integer.
pub fn order_statistic_index(t: usize, p: f64) -> usize {
    let x = t as f64 * p;
    let nearest = x.round();
    let idx = if (x - nearest).abs() <= 1e-9 * x.abs().max(1.0) {
        nearest as usize
    } else {
        x.floor() as usize + 1
    };
    idx.clamp(1, t.max(1))
}

/// `100(1 - tau)%` interval on ascending draws by the order-statistic rule.
pub fn credible_interval_sorted(sorted: &[f64], tau: f64) -> (f64, f64) {
    let t = sorted.len();
    let a = sorted[order_statistic_index(t, tau / 2.0) - 1];
    let b = sorted[order_statistic_index(t, 1.0 - tau / 2.0) - 1];
    (a, b)
}

fn check_level(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(Error::Parameter(format!("{name} must lie in (0, 1), got {v}")))
    }
}

pub fn compute_aci(label: RegressorLabel, draws: &[f64], tau: f64, alpha: f64) -> Result<AciReport> {
    check_level("tau", tau)?;
    check_level("alpha", alpha)?;
    if draws.len() < MIN_DRAWS {
        return Err(Error::Parameter(format!(
            "ACI needs at least {MIN_DRAWS} draws, got {}",
            draws.len()
        )));
    }
    if draws.iter().any(|d| !d.is_finite()) {
        return Err(Error::Parameter("draws must be finite".into()));
    }
    let mut sorted = draws.to_vec();
    sorted.sort_by(f64::total_cmp);
    let total = sorted.len();

    let absent = |cluster_means, cluster2_size| AciReport {
        regressor_label: label.clone(),
        interval: None,
        significance: 0.0,
        selected: false,
        cluster_means,
        cluster2_size,
        n_draws: total,
    };

    let Some(clusters) = two_means_sorted(&sorted) else {
        return Ok(absent(None, 0));
    };
    let upper = &sorted[clusters.split..];
    let means = Some((clusters.lower_mean, clusters.upper_mean));
    let (a, b) = credible_interval_sorted(upper, tau);
    if !(a > 0.0) {
        return Ok(absent(means, upper.len()));
    }
    let inside = sorted.partition_point(|&x| x <= b) - sorted.partition_point(|&x| x < a);
    let significance = inside as f64 / total as f64;
    Ok(AciReport {
        regressor_label: label,
        interval: Some((a, b)),
        significance,
        selected: significance > alpha,
        cluster_means: means,
        cluster2_size: upper.len(),
        n_draws: total,
    })
}

/// ACI reports for every coefficient of a chain, in regressor order.
pub fn select_gene(chain: &PosteriorChain, tau: f64, alpha: f64) -> Result<Vec<AciReport>> {
    if chain.n_draws() == 0 {
        return Err(Error::Parameter(format!("chain for `{}` is empty", chain.gene_id)));
    }
    (0..chain.n_regressors())
        .map(|j| compute_aci(chain.labels[j].clone(), &chain.beta_column(j), tau, alpha))
        .collect()
}
