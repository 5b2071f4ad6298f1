//! Chain summaries used to judge Monte-Carlo error.

/// Standard error of the mean by non-overlapping batch means.
///
/// Accounts for autocorrelation as long as each batch is much longer than the
/// chain's integrated autocorrelation time.
pub fn batch_means_se(draws: &[f64], n_batches: usize) -> f64 {
    let n_batches = n_batches.max(2);
    let batch = draws.len() / n_batches;
    if batch == 0 {
        return f64::NAN;
    }
    let means: Vec<f64> = draws
        .chunks_exact(batch)
        .take(n_batches)
        .map(|c| c.iter().sum::<f64>() / batch as f64)
        .collect();
    let grand = means.iter().sum::<f64>() / n_batches as f64;
    let var = means.iter().map(|m| (m - grand).powi(2)).sum::<f64>() / (n_batches as f64 - 1.0);
    (var / n_batches as f64).sqrt()
}

/// Lag-`k` sample autocorrelation.
pub fn autocorrelation(draws: &[f64], lag: usize) -> f64 {
    let n = draws.len();
    if lag >= n {
        return f64::NAN;
    }
    let mean = draws.iter().sum::<f64>() / n as f64;
    let var: f64 = draws.iter().map(|d| (d - mean).powi(2)).sum();
    let cov: f64 = draws
        .iter()
        .zip(&draws[lag..])
        .map(|(a, b)| (a - mean) * (b - mean))
        .sum();
    cov / var
}

pub fn mean(draws: &[f64]) -> f64 {
    draws.iter().sum::<f64>() / draws.len() as f64
}

/// Median by sorting a copy; the upper middle element for even lengths.
pub fn median(draws: &[f64]) -> f64 {
    let mut sorted = draws.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted[sorted.len() / 2]
}

/// Empirical quantile using the nearest-rank rule.
pub fn quantile(draws: &[f64], q: f64) -> f64 {
    let mut sorted = draws.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rank = ((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    sorted[rank - 1]
}
