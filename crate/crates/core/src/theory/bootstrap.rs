use rand::Rng as _;
use serde::Serialize;

use crate::geometry::Rng;

pub const BOOTSTRAP_RESAMPLES: usize = 1000;

/// Bootstrap distribution of `stat(gus) − stat(eas)` with the two arms
/// resampled independently.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Gap {
    /// Point estimate on the original samples.
    pub gap: f64,
    /// Standard deviation across resamples.
    pub se: f64,
    /// 5% and 95% quantiles across resamples.
    pub lower: f64,
    pub upper: f64,
}

impl Gap {
    /// `stat(eas) ≤ stat(gus)` at one-sided 95% confidence.
    pub fn eas_not_larger(&self) -> bool {
        self.lower >= 0.0
    }

    /// A 90% interval that contains zero, or both statistics equal.
    pub fn consistent_with_zero(&self) -> bool {
        self.gap == 0.0 || (self.lower <= 0.0 && self.upper >= 0.0)
    }
}

/// `stat` receives multiplicity counts, one per original sample.
pub fn bootstrap_gap(
    n_eas: usize,
    n_gus: usize,
    stat_eas: &dyn Fn(&[u32]) -> f64,
    stat_gus: &dyn Fn(&[u32]) -> f64,
    resamples: usize,
    rng: &mut Rng,
) -> Gap {
    let ones = |n| vec![1u32; n];
    let gap = stat_gus(&ones(n_gus)) - stat_eas(&ones(n_eas));
    let mut draws = Vec::with_capacity(resamples);
    let mut ce = vec![0u32; n_eas];
    let mut cg = vec![0u32; n_gus];
    for _ in 0..resamples {
        resample_counts(&mut ce, rng);
        resample_counts(&mut cg, rng);
        draws.push(stat_gus(&cg) - stat_eas(&ce));
    }
    draws.sort_by(|a, b| a.total_cmp(b));
    let mean = draws.iter().sum::<f64>() / resamples as f64;
    let se = (draws.iter().map(|v| (v - mean).powi(2)).sum::<f64>()
        / (resamples.max(2) - 1) as f64)
        .sqrt();
    Gap {
        gap,
        se,
        lower: quantile(&draws, 0.05),
        upper: quantile(&draws, 0.95),
    }
}

fn resample_counts(counts: &mut [u32], rng: &mut Rng) {
    let n = counts.len();
    counts.iter_mut().for_each(|c| *c = 0);
    for _ in 0..n {
        counts[rng.gen_range(0..n)] += 1;
    }
}

/// Linear-interpolated quantile of sorted data.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Unbiased sample variance of `x` weighted by multiplicities.
pub fn weighted_variance(x: &[f64], counts: &[u32]) -> f64 {
    let n: f64 = counts.iter().map(|&c| c as f64).sum();
    if n < 2.0 {
        return 0.0;
    }
    let mean = x
        .iter()
        .zip(counts)
        .map(|(v, &c)| v * c as f64)
        .sum::<f64>()
        / n;
    x.iter()
        .zip(counts)
        .map(|(v, &c)| c as f64 * (v - mean).powi(2))
        .sum::<f64>()
        / (n - 1.0)
}
