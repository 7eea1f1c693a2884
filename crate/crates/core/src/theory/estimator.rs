use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::bootstrap::{bootstrap_gap, weighted_variance, Gap, BOOTSTRAP_RESAMPLES};
use super::field::ResidualField;
use super::quadrature::{oracle_integral, CompensatedSum};
use crate::error::{Error, Result};
use crate::geometry::{
    resolve_allocation, rng_for, sample_eas, sample_gus, stream_id, Allocation, Partition, Rng,
};

/// Trials whose points are evaluated in one field call.
const TRIAL_BLOCK: usize = 64;
/// Quadrature settings for every oracle in this module.
pub const ORACLE_START: usize = 16;
pub const ORACLE_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Eas,
    Gus,
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strategy::Eas => "eas",
            Strategy::Gus => "gus",
        })
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "eas" => Ok(Strategy::Eas),
            "gus" => Ok(Strategy::Gus),
            _ => Err(Error::config(format!(
                "unknown strategy {s:?}; expected eas or gus"
            ))),
        }
    }
}

/// Monte-Carlo statistics for one experiment. Serializes to the report
/// JSON; per-trial samples are kept in memory only.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EstimatorReport {
    pub experiment: String,
    #[serde(rename = "I")]
    pub integral: f64,
    pub mean_eas: f64,
    pub var_eas: f64,
    pub mean_gus: f64,
    pub var_gus: f64,
    /// Median per-trial coverage ratio `I / Î`.
    pub coverage_eas: f64,
    pub coverage_gus: f64,
    pub trace_cov_eas: Option<f64>,
    pub trace_cov_gus: Option<f64>,
    pub pass: bool,
    #[serde(skip)]
    pub samples_eas: Vec<f64>,
    #[serde(skip)]
    pub samples_gus: Vec<f64>,
}

impl EstimatorReport {
    pub fn from_samples(experiment: &str, integral: f64, eas: Vec<f64>, gus: Vec<f64>) -> Self {
        let (mean_eas, var_eas) = mean_var(&eas);
        let (mean_gus, var_gus) = mean_var(&gus);
        Self {
            experiment: experiment.to_string(),
            integral,
            mean_eas,
            var_eas,
            mean_gus,
            var_gus,
            coverage_eas: median_coverage(integral, &eas),
            coverage_gus: median_coverage(integral, &gus),
            trace_cov_eas: None,
            trace_cov_gus: None,
            pass: false,
            samples_eas: eas,
            samples_gus: gus,
        }
    }

    pub fn trials(&self) -> usize {
        self.samples_eas.len()
    }

    /// Both means within 3 standard errors of `I`.
    pub fn unbiased(&self) -> bool {
        within_3se(&self.samples_eas, self.integral) && within_3se(&self.samples_gus, self.integral)
    }

    /// Bootstrap distribution of `Var(Î_GUS) − Var(Î_EAS)`.
    pub fn variance_gap(&self, rng: &mut Rng) -> Gap {
        let (e, g) = (&self.samples_eas, &self.samples_gus);
        bootstrap_gap(
            e.len(),
            g.len(),
            &|c| weighted_variance(e, c),
            &|c| weighted_variance(g, c),
            BOOTSTRAP_RESAMPLES,
            rng,
        )
    }
}

pub fn mean_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    if x.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = CompensatedSum::of(x.iter().copied()) / n;
    let var = if x.len() < 2 {
        0.0
    } else {
        CompensatedSum::of(x.iter().map(|v| (v - mean).powi(2))) / (n - 1.0)
    };
    (mean, var)
}

/// `|mean − I| ≤ 3·SE`, with an exact-equality fallback when every trial
/// returned the same value.
pub fn within_3se(samples: &[f64], integral: f64) -> bool {
    let (mean, var) = mean_var(samples);
    let se = (var / samples.len() as f64).sqrt();
    let slack = 1e-12 * integral.abs().max(mean.abs());
    (mean - integral).abs() <= 3.0 * se + slack
}

fn median_coverage(integral: f64, samples: &[f64]) -> f64 {
    let mut c: Vec<f64> = samples.iter().map(|&s| integral / s).collect();
    c.sort_by(|a, b| a.total_cmp(b));
    super::bootstrap::quantile(&c, 0.5)
}

/// Points and quadrature weights of one draw.
pub struct Draw {
    pub coords: Vec<f64>,
    pub weights: Vec<f64>,
}

/// One EAS or GUS draw with estimator weights: `|E_k| / m_k` per point
/// for EAS, `|Ω| / M` for GUS.
pub fn draw(
    strategy: Strategy,
    partition: &Partition<f64>,
    allocation: &[usize],
    rng: &mut Rng,
) -> Result<Draw> {
    match strategy {
        Strategy::Eas => {
            if allocation.contains(&0) {
                return Err(Error::config("every element needs at least one sample"));
            }
            let batch = sample_eas(
                partition,
                &Allocation::Table(allocation.to_vec()),
                false,
                rng,
            )?;
            let weights = partition
                .elements()
                .iter()
                .zip(allocation)
                .flat_map(|(e, &m)| std::iter::repeat_n(e.measure / m as f64, m))
                .collect();
            Ok(Draw {
                coords: batch.coords().to_vec(),
                weights,
            })
        }
        Strategy::Gus => {
            let m: usize = allocation.iter().sum();
            let batch = sample_gus(partition.domain(), m, None, rng);
            let w = partition.domain().measure() / m as f64;
            Ok(Draw {
                coords: batch.coords().to_vec(),
                weights: vec![w; m],
            })
        }
    }
}

/// Proportional allocation of `m` points, rounded by largest remainder.
pub fn proportional(partition: &Partition<f64>, m: usize) -> Result<Vec<usize>> {
    resolve_allocation(partition, &Allocation::Total(m), true)
}

/// Per-trial streams: `(experiment, 2t)` for EAS and `(experiment, 2t+1)`
/// for GUS.
pub fn trial_rng(seed: u64, experiment: u32, trial: usize, strategy: Strategy) -> Rng {
    let arm = match strategy {
        Strategy::Eas => 0,
        Strategy::Gus => 1,
    };
    rng_for(seed, stream_id(experiment, (2 * trial + arm) as u32))
}

/// `trials` independent values of `Î` for one strategy.
pub fn estimate_samples(
    field: &dyn ResidualField,
    strategy: Strategy,
    partition: &Partition<f64>,
    allocation: &[usize],
    trials: usize,
    seed: u64,
    experiment: u32,
) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(trials);
    let mut t = 0;
    while t < trials {
        let block = TRIAL_BLOCK.min(trials - t);
        let mut coords = Vec::new();
        let mut weights = Vec::new();
        let mut sizes = Vec::with_capacity(block);
        for i in t..t + block {
            let dr = draw(
                strategy,
                partition,
                allocation,
                &mut trial_rng(seed, experiment, i, strategy),
            )?;
            sizes.push(dr.weights.len());
            coords.extend(dr.coords);
            weights.extend(dr.weights);
        }
        let phi = field.eval_batch(&coords)?;
        let mut at = 0;
        for n in sizes {
            out.push(
                phi[at..at + n]
                    .iter()
                    .zip(&weights[at..at + n])
                    .map(|(p, w)| p * w)
                    .sum(),
            );
            at += n;
        }
        t += block;
    }
    Ok(out)
}

/// Oracle `I` over the partition's domain; a non-converged quadrature is
/// an error because every comparison below is anchored on it.
pub fn oracle_for(field: &dyn ResidualField, partition: &Partition<f64>) -> Result<f64> {
    let q = oracle_integral(field, partition.domain().bounds(), ORACLE_START, ORACLE_TOL)?;
    if !q.converged {
        return Err(Error::non_finite(
            format!(
                "oracle quadrature did not reach relative change {ORACLE_TOL} by {} cells per axis",
                q.resolution
            ),
            None,
        ));
    }
    Ok(q.value)
}

/// Î_EAS and Î_GUS over `trials` trials with `m` points each. EAS uses
/// `allocation` when given (any positive counts) and proportional
/// allocation otherwise.
#[allow(non_snake_case)]
pub fn estimate_I(
    experiment: &str,
    field: &dyn ResidualField,
    partition: &Partition<f64>,
    m: usize,
    allocation: Option<&[usize]>,
    trials: usize,
    seed: u64,
    integral: Option<f64>,
) -> Result<EstimatorReport> {
    let alloc = match allocation {
        Some(a) => a.to_vec(),
        None => proportional(partition, m)?,
    };
    if alloc.len() != partition.len() {
        return Err(Error::config(
            "allocation length differs from the element count",
        ));
    }
    if alloc.iter().sum::<usize>() != m {
        return Err(Error::config(format!(
            "allocation sums to {}, expected {m}",
            alloc.iter().sum::<usize>()
        )));
    }
    let integral = match integral {
        Some(i) => i,
        None => oracle_for(field, partition)?,
    };
    let exp_id = experiment_id(experiment);
    let eas = estimate_samples(
        field,
        Strategy::Eas,
        partition,
        &alloc,
        trials,
        seed,
        exp_id,
    )?;
    let gus = estimate_samples(
        field,
        Strategy::Gus,
        partition,
        &alloc,
        trials,
        seed,
        exp_id,
    )?;
    let mut report = EstimatorReport::from_samples(experiment, integral, eas, gus);
    report.pass = report.unbiased();
    Ok(report)
}

/// Stable stream family for a named experiment (FNV-1a, folded to 31 bits
/// so it never collides with the training streams).
pub fn experiment_id(name: &str) -> u32 {
    let mut h: u32 = 0x811c9dc5;
    for b in name.bytes() {
        h ^= u32::from(b);
        h = h.wrapping_mul(0x01000193);
    }
    (h >> 1) | 0x4000_0000
}

/// `I / Î` from a single draw.
pub fn coverage_ratio(
    field: &dyn ResidualField,
    strategy: Strategy,
    partition: &Partition<f64>,
    m: usize,
    rng: &mut Rng,
) -> Result<f64> {
    let integral = oracle_for(field, partition)?;
    let alloc = proportional(partition, m)?;
    let dr = draw(strategy, partition, &alloc, rng)?;
    let phi = field.eval_batch(&dr.coords)?;
    let est: f64 = phi.iter().zip(&dr.weights).map(|(p, w)| p * w).sum();
    Ok(integral / est)
}

/// Fraction of paired trials where EAS's coverage ratio is strictly closer
/// to 1 than GUS's.
pub fn eas_closer_fraction(report: &EstimatorReport) -> f64 {
    let i = report.integral;
    let wins = report
        .samples_eas
        .iter()
        .zip(&report.samples_gus)
        .filter(|(e, g)| (i / **e - 1.0).abs() < (i / **g - 1.0).abs())
        .count();
    wins as f64 / report.trials().max(1) as f64
}
