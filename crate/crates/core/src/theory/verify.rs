use serde::Serialize;

use super::bootstrap::{bootstrap_gap, Gap, BOOTSTRAP_RESAMPLES};
use super::estimator::{
    draw, estimate_I, experiment_id, oracle_for, proportional, trial_rng, EstimatorReport,
    Strategy, ORACLE_START, ORACLE_TOL,
};
use super::field::{ModelResidualField, ResidualField};
use super::quadrature::oracle_integral;
use crate::error::{Error, Result};
use crate::geometry::{rng_for, stream_id, Partition};
use crate::losses::weighted_interior_energy;
use crate::models::Network;
use crate::pde::PdeProblem;
use crate::scalar::Scalar;

/// `Σ_k I_k² / |E_k| ≥ I² / |Ω|` with `I = Σ_k I_k`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CauchySchwarz {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// Checks the inequality for given element integrals. Rounding slack is a
/// few ulps of the left side.
pub fn cauchy_schwarz(partition: &Partition<f64>, element_integrals: &[f64]) -> CauchySchwarz {
    let lhs: f64 = partition
        .elements()
        .iter()
        .zip(element_integrals)
        .map(|(e, ik)| ik * ik / e.measure)
        .sum();
    let total: f64 = element_integrals.iter().sum();
    let rhs = total * total / partition.domain().measure();
    CauchySchwarz {
        lhs,
        rhs,
        holds: lhs >= rhs - 8.0 * f64::EPSILON * lhs.abs(),
    }
}

/// Oracle `I_k` on every element box.
pub fn element_integrals(
    field: &dyn ResidualField,
    partition: &Partition<f64>,
) -> Result<Vec<f64>> {
    partition
        .elements()
        .iter()
        .map(|e| {
            let q = oracle_integral(field, &e.bounds, 2, ORACLE_TOL)?;
            if !q.converged {
                return Err(Error::non_finite(
                    format!("element {} quadrature did not converge", e.index),
                    None,
                ));
            }
            Ok(q.value)
        })
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct VarianceInequality {
    #[serde(flatten)]
    pub report: EstimatorReport,
    pub variance_gap: Gap,
    /// `Var(Î_EAS) ≤ Var(Î_GUS) + 3·SE` (bootstrap SE of the gap).
    pub within_margin: bool,
    /// `Var(Î_EAS) ≤ Var(Î_GUS)` at one-sided 95% bootstrap confidence.
    pub confident: bool,
    pub cauchy_schwarz: CauchySchwarz,
}

/// Empirical variance comparison plus the deterministic inequality behind
/// it. `pass` requires the margin test and the inequality.
pub fn verify_variance_inequality(
    experiment: &str,
    field: &dyn ResidualField,
    partition: &Partition<f64>,
    m: usize,
    trials: usize,
    seed: u64,
) -> Result<VarianceInequality> {
    let iks = element_integrals(field, partition)?;
    let cs = cauchy_schwarz(partition, &iks);
    let integral = iks.iter().sum();
    let mut report = estimate_I(
        experiment,
        field,
        partition,
        m,
        None,
        trials,
        seed,
        Some(integral),
    )?;
    let mut rng = rng_for(seed, stream_id(experiment_id(experiment), u32::MAX));
    let gap = report.variance_gap(&mut rng);
    let within_margin = report.var_eas <= report.var_gus + 3.0 * gap.se;
    report.pass = within_margin && cs.holds;
    Ok(VarianceInequality {
        report,
        variance_gap: gap,
        within_margin,
        confident: gap.eas_not_larger(),
        cauchy_schwarz: cs,
    })
}

/// `(Σ_i w_i ℓ(x_i), Σ_i w_i ∇_θ ℓ(x_i))` for one weighted draw.
pub type GradientIntegrand<'a> = dyn Fn(&[f64], &[f64]) -> Result<(f64, Vec<f64>)> + 'a;

/// Per-trial gradient estimates of both strategies.
pub struct GradientSamples {
    pub values_eas: Vec<f64>,
    pub values_gus: Vec<f64>,
    pub grads_eas: Vec<Vec<f64>>,
    pub grads_gus: Vec<Vec<f64>>,
}

pub fn gradient_samples(
    experiment: &str,
    integrand: &GradientIntegrand<'_>,
    partition: &Partition<f64>,
    m: usize,
    trials: usize,
    seed: u64,
) -> Result<GradientSamples> {
    let alloc = proportional(partition, m)?;
    let id = experiment_id(experiment);
    let mut out = GradientSamples {
        values_eas: vec![],
        values_gus: vec![],
        grads_eas: vec![],
        grads_gus: vec![],
    };
    for t in 0..trials {
        for strategy in [Strategy::Eas, Strategy::Gus] {
            let dr = draw(
                strategy,
                partition,
                &alloc,
                &mut trial_rng(seed, id, t, strategy),
            )?;
            let (v, g) = integrand(&dr.coords, &dr.weights)?;
            let (vals, grads) = match strategy {
                Strategy::Eas => (&mut out.values_eas, &mut out.grads_eas),
                Strategy::Gus => (&mut out.values_gus, &mut out.grads_gus),
            };
            vals.push(v);
            grads.push(g);
        }
    }
    Ok(out)
}

/// `Tr(Cov)` of per-trial gradients under resampling, from whichever of
/// the centered columns (`p ≤ n`) or the centered Gram matrix is smaller.
enum TraceStat {
    Columns {
        n: usize,
        p: usize,
        centered: Vec<f64>,
    },
    Gram {
        n: usize,
        gram: Vec<f64>,
    },
}

impl TraceStat {
    fn new(grads: &[Vec<f64>]) -> Self {
        let n = grads.len();
        let p = grads.first().map_or(0, Vec::len);
        let mut mean = vec![0.0; p];
        for g in grads {
            mean.iter_mut().zip(g).for_each(|(m, v)| *m += v / n as f64);
        }
        let mut centered = Vec::with_capacity(n * p);
        for g in grads {
            centered.extend(g.iter().zip(&mean).map(|(v, m)| v - m));
        }
        if p <= n {
            return TraceStat::Columns { n, p, centered };
        }
        let mut gram = vec![0.0; n * n];
        f64::gemm_acc(
            n, p, n, &centered, p as isize, 1, &centered, 1, p as isize, &mut gram, n as isize, 1,
        );
        TraceStat::Gram { n, gram }
    }

    /// Multiplicities `c` select a resample:
    /// `(Σ c_t ‖g_t‖² − ‖Σ c_t g_t‖² / n) / (n − 1)`.
    fn trace(&self, c: &[u32]) -> f64 {
        match self {
            TraceStat::Columns { n, p, centered } => {
                if *n < 2 {
                    return 0.0;
                }
                let mut s1 = vec![0.0; *p];
                let mut s2 = 0.0;
                for (row, &ct) in centered.chunks_exact((*p).max(1)).zip(c) {
                    if ct == 0 {
                        continue;
                    }
                    let w = ct as f64;
                    for (a, v) in s1.iter_mut().zip(row) {
                        *a += w * v;
                    }
                    s2 += w * row.iter().map(|v| v * v).sum::<f64>();
                }
                (s2 - s1.iter().map(|v| v * v).sum::<f64>() / *n as f64) / (*n - 1) as f64
            }
            TraceStat::Gram { n, gram } => {
                let n = *n;
                if n < 2 {
                    return 0.0;
                }
                let mut diag = 0.0;
                let mut quad = 0.0;
                for s in 0..n {
                    if c[s] == 0 {
                        continue;
                    }
                    let cs = c[s] as f64;
                    diag += cs * gram[s * n + s];
                    let row = &gram[s * n..(s + 1) * n];
                    quad += cs * row.iter().zip(c).map(|(k, &ct)| k * ct as f64).sum::<f64>();
                }
                (diag - quad / n as f64) / (n - 1) as f64
            }
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct GradientVariance {
    #[serde(flatten)]
    pub report: EstimatorReport,
    /// Bootstrap distribution of `Tr Cov(G_GUS) − Tr Cov(G_EAS)`.
    pub trace_gap: Gap,
}

/// Traces of the gradient covariance for both strategies. `pass` is set
/// by [`GradientExpectation`].
pub fn gradient_variance_with(
    experiment: &str,
    integrand: &GradientIntegrand<'_>,
    integral: f64,
    partition: &Partition<f64>,
    m: usize,
    trials: usize,
    seed: u64,
    expect: GradientExpectation,
) -> Result<GradientVariance> {
    let s = gradient_samples(experiment, integrand, partition, m, trials, seed)?;
    let te = TraceStat::new(&s.grads_eas);
    let tg = TraceStat::new(&s.grads_gus);
    let mut rng = rng_for(seed, stream_id(experiment_id(experiment), u32::MAX));
    let gap = bootstrap_gap(
        trials,
        trials,
        &|c| te.trace(c),
        &|c| tg.trace(c),
        BOOTSTRAP_RESAMPLES,
        &mut rng,
    );
    let ones = vec![1u32; trials];
    let mut report =
        EstimatorReport::from_samples(experiment, integral, s.values_eas, s.values_gus);
    let (tr_e, tr_g) = (te.trace(&ones), tg.trace(&ones));
    report.trace_cov_eas = Some(tr_e);
    report.trace_cov_gus = Some(tr_g);
    report.pass = match expect {
        GradientExpectation::EasLower => gap.eas_not_larger(),
        GradientExpectation::Equal { rel_tol } => {
            (tr_e - tr_g).abs() <= rel_tol * tr_e.max(tr_g) || gap.consistent_with_zero()
        }
    };
    Ok(GradientVariance {
        report,
        trace_gap: gap,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum GradientExpectation {
    /// `Tr Cov(G_EAS) ≤ Tr Cov(G_GUS)` at one-sided 95% confidence.
    EasLower,
    /// Traces agree to `rel_tol` or the bootstrap gap interval covers 0.
    Equal { rel_tol: f64 },
}

/// Gradient-variance comparison for a frozen pointwise network on the
/// interior residual energy of `problem`.
pub fn verify_gradient_variance(
    experiment: &str,
    net: &Network,
    theta: &[f64],
    problem: &PdeProblem,
    partition: &Partition<f64>,
    m: usize,
    trials: usize,
    seed: u64,
) -> Result<GradientVariance> {
    let field = ModelResidualField::new(net, problem, theta)?;
    let integral = oracle_integral(
        &field,
        partition.domain().bounds(),
        ORACLE_START,
        ORACLE_TOL,
    )?
    .value;
    let integrand = |coords: &[f64], weights: &[f64]| {
        weighted_interior_energy(net, problem, theta, coords, weights)
    };
    gradient_variance_with(
        experiment,
        &integrand,
        integral,
        partition,
        m,
        trials,
        seed,
        GradientExpectation::EasLower,
    )
}

/// Convenience: oracle `I` of a field over a partition's domain.
pub fn true_integral(field: &dyn ResidualField, partition: &Partition<f64>) -> Result<f64> {
    oracle_for(field, partition)
}
