use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    partition_uniform, rng_for, sample_eas, sample_gus, sample_lhs, sample_rad, stream_id,
    Allocation, Domain, PointBatch, RadConfig,
};
use crate::losses::{LossTerm, TermBatch, TrainingData};
use crate::pde::{ConditionOp, PdeProblem, PeriodicPairing};
use crate::scalar::Scalar;

/// Collocation sampling strategy.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sampler {
    Eas,
    Gus,
    Lhs,
    Rad,
}

impl fmt::Display for Sampler {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sampler::Eas => "eas",
            Sampler::Gus => "gus",
            Sampler::Lhs => "lhs",
            Sampler::Rad => "rad",
        })
    }
}

impl FromStr for Sampler {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "eas" => Ok(Sampler::Eas),
            "gus" => Ok(Sampler::Gus),
            "lhs" => Ok(Sampler::Lhs),
            "rad" => Ok(Sampler::Rad),
            _ => Err(Error::config(format!(
                "unknown sampler {s:?}; expected eas, gus, lhs or rad"
            ))),
        }
    }
}

/// Sizes of the collocation sets. Every sampler draws the same totals:
/// `Π cells · points_per_element` interior points and, per face, the
/// face element count times `face_points_per_element`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplingPlan {
    pub sampler: Sampler,
    /// Interior cells per axis; faces reuse the counts of their free axes.
    pub cells: Vec<usize>,
    pub points_per_element: usize,
    pub face_points_per_element: usize,
    pub rad: RadConfig,
}

/// Stream family for collocation draws.
const SAMPLING_STREAM: u32 = 1;

type Field<'a, T> = &'a dyn Fn(&PointBatch<T>) -> Vec<T>;

/// Samples every batch the problem's loss needs. `rad_field` supplies the
/// residual for RAD's interior draw; without it RAD falls back to uniform
/// sampling (there is no residual before training starts). Faces under RAD
/// are sampled uniformly.
pub fn sample_training_data<T: Scalar>(
    problem: &PdeProblem,
    plan: &SamplingPlan,
    seed: u64,
    rad_field: Option<Field<'_, T>>,
) -> Result<TrainingData<T>> {
    let domain: Domain<T> = problem.domain();
    if plan.cells.len() != domain.dim() {
        return Err(Error::config(format!(
            "partition needs {} cell counts, got {}",
            domain.dim(),
            plan.cells.len()
        )));
    }
    if plan.points_per_element == 0 || plan.face_points_per_element == 0 {
        return Err(Error::config("points per element must be >= 1"));
    }
    let mut batches = Vec::new();
    let interior = sample_region(
        &domain,
        &plan.cells,
        plan.points_per_element,
        plan,
        0,
        seed,
        rad_field,
    )?;
    batches.push(TermBatch {
        term: LossTerm::Interior,
        condition: None,
        points: interior.0,
        partner: None,
        element_measures: interior.1,
    });
    for (i, c) in problem.conditions().iter().enumerate() {
        let face = c.face(&domain)?;
        let cells: Vec<usize> = plan
            .cells
            .iter()
            .enumerate()
            .filter(|(a, _)| *a != c.axis)
            .map(|(_, &n)| n)
            .collect();
        let (points, measures) = sample_region(
            &face,
            &cells,
            plan.face_points_per_element,
            plan,
            i + 1,
            seed,
            None,
        )?;
        let (points, partner) = if c.op == ConditionOp::Periodic {
            let pair = PeriodicPairing::from_lower(points, c.axis, T::lit(problem.period(c.axis)));
            (pair.lo, Some(pair.hi))
        } else {
            (points, None)
        };
        batches.push(TermBatch {
            term: LossTerm::of_condition(c),
            condition: Some(*c),
            points,
            partner,
            element_measures: measures,
        });
    }
    Ok(TrainingData { batches })
}

fn sample_region<T: Scalar>(
    domain: &Domain<T>,
    cells: &[usize],
    per_element: usize,
    plan: &SamplingPlan,
    index: usize,
    seed: u64,
    rad_field: Option<Field<'_, T>>,
) -> Result<(PointBatch<T>, Vec<T>)> {
    let partition = partition_uniform(domain, cells)?;
    let measures = partition.elements().iter().map(|e| e.measure).collect();
    let total = partition.len() * per_element;
    let mut rng = rng_for(seed, stream_id(SAMPLING_STREAM, index as u32));
    let mut batch = match (plan.sampler, rad_field) {
        (Sampler::Eas, _) => {
            return Ok((
                sample_eas(
                    &partition,
                    &Allocation::PerElement(per_element),
                    false,
                    &mut rng,
                )?,
                measures,
            ))
        }
        (Sampler::Lhs, _) => sample_lhs(domain, total, &mut rng),
        (Sampler::Rad, Some(field)) => sample_rad(domain, total, field, &plan.rad, &mut rng)?,
        (Sampler::Gus, _) | (Sampler::Rad, None) => sample_gus(domain, total, None, &mut rng),
    };
    batch.assign_elements(&partition);
    Ok((batch, measures))
}
