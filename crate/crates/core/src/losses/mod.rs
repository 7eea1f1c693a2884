//! PINN mean-squared loss and the element-localized residual-energy loss.

mod data;
#[cfg(test)]
mod tests;

use serde::{Deserialize, Serialize};

pub use data::{sample_training_data, Sampler, SamplingPlan};

use crate::diff::{Tape, Var};
use crate::error::{Error, Result};
use crate::geometry::PointBatch;
use crate::models::FieldModel;
use crate::pde::{Condition, ConditionOp, PdeProblem, TapeField, Term};
use crate::scalar::Scalar;

/// Loss region; conditions map onto the last three.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossTerm {
    Interior,
    Initial,
    InitialDt,
    Boundary,
}

impl LossTerm {
    pub const ALL: [LossTerm; 4] = [
        LossTerm::Interior,
        LossTerm::Initial,
        LossTerm::InitialDt,
        LossTerm::Boundary,
    ];

    pub fn of_condition(c: &Condition) -> Self {
        match c.term {
            Term::Initial => LossTerm::Initial,
            Term::InitialDt => LossTerm::InitialDt,
            Term::Boundary => LossTerm::Boundary,
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

/// Term weights `λ_X`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lambdas {
    pub interior: f64,
    pub initial: f64,
    pub initial_dt: f64,
    pub boundary: f64,
}

impl Default for Lambdas {
    fn default() -> Self {
        Self {
            interior: 1.0,
            initial: 1.0,
            initial_dt: 1.0,
            boundary: 1.0,
        }
    }
}

impl Lambdas {
    pub fn get(&self, t: LossTerm) -> f64 {
        match t {
            LossTerm::Interior => self.interior,
            LossTerm::Initial => self.initial,
            LossTerm::InitialDt => self.initial_dt,
            LossTerm::Boundary => self.boundary,
        }
    }
}

/// Collocation points for one loss term.
#[derive(Clone, Debug, PartialEq)]
pub struct TermBatch<T> {
    pub term: LossTerm,
    /// `None` for the interior residual.
    pub condition: Option<Condition>,
    /// Points; the lower face for periodic conditions.
    pub points: PointBatch<T>,
    /// Periodic partners of `points`, row for row.
    pub partner: Option<PointBatch<T>>,
    /// `|E_k|` by element index; empty when points carry no element tags.
    pub element_measures: Vec<T>,
}

/// Every batch a loss evaluation needs.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainingData<T> {
    pub batches: Vec<TermBatch<T>>,
}

impl<T: Scalar> TrainingData<T> {
    pub fn interior(&self) -> Option<&TermBatch<T>> {
        self.batches.iter().find(|b| b.term == LossTerm::Interior)
    }

    pub fn interior_mut(&mut self) -> Option<&mut TermBatch<T>> {
        self.batches
            .iter_mut()
            .find(|b| b.term == LossTerm::Interior)
    }

    pub fn total_points(&self) -> usize {
        self.batches
            .iter()
            .map(|b| b.points.len() + b.partner.as_ref().map_or(0, |p| p.len()))
            .sum()
    }
}

/// Region values of one loss evaluation. Region entries are unweighted;
/// `total = Σ λ_X · region`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub step: usize,
    pub interior: f64,
    pub initial: f64,
    pub initial_dt: f64,
    pub boundary: f64,
    pub total: f64,
    /// Localized energies `E_X(E_k)` per term, ascending element index.
    #[serde(skip)]
    pub element_energies: Vec<(LossTerm, Vec<f64>)>,
}

impl LossBreakdown {
    pub fn get(&self, t: LossTerm) -> f64 {
        match t {
            LossTerm::Interior => self.interior,
            LossTerm::Initial => self.initial,
            LossTerm::InitialDt => self.initial_dt,
            LossTerm::Boundary => self.boundary,
        }
    }

    fn set(&mut self, t: LossTerm, v: f64) {
        match t {
            LossTerm::Interior => self.interior = v,
            LossTerm::Initial => self.initial = v,
            LossTerm::InitialDt => self.initial_dt = v,
            LossTerm::Boundary => self.boundary = v,
        }
    }
}

/// How squared residuals are reduced inside a term.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    /// Mean over the term's points.
    Mean,
    /// `(1/K_X) Σ_k (|E_k|/m_k) Σ_{x ∈ E_k} r(x)²`.
    Localized,
}

/// Loss value with its parameter gradient.
#[derive(Clone, Debug, PartialEq)]
pub struct LossEval<T> {
    pub breakdown: LossBreakdown,
    pub gradient: Vec<T>,
}

/// Standard PINN loss: λ-weighted mean squared residual per term.
pub fn pinn_loss<T: Scalar>(
    net: &(impl FieldModel<T> + ?Sized),
    problem: &PdeProblem,
    theta: &[T],
    data: &TrainingData<T>,
    lambdas: &Lambdas,
) -> Result<LossEval<T>> {
    evaluate(net, problem, theta, data, lambdas, Weighting::Mean)
}

/// Localized residual-energy loss averaged over each term's elements.
pub fn setpinn_loss<T: Scalar>(
    net: &(impl FieldModel<T> + ?Sized),
    problem: &PdeProblem,
    theta: &[T],
    data: &TrainingData<T>,
    lambdas: &Lambdas,
) -> Result<LossEval<T>> {
    evaluate(net, problem, theta, data, lambdas, Weighting::Localized)
}

/// `(|E_k| / m_k) · Σ r²` for the squared residual norms of one element.
pub fn localized_energy<T: Scalar>(measure: T, squared_residuals: &[T]) -> T {
    let m = T::lit(squared_residuals.len() as f64);
    measure / m * squared_residuals.iter().copied().sum::<T>()
}

/// Localized energy of one element under the interior operator. Points are
/// forwarded as sets for set networks, so their count must be a multiple
/// of the set size.
pub fn element_energy<T: Scalar>(
    net: &(impl FieldModel<T> + ?Sized),
    problem: &PdeProblem,
    theta: &[T],
    element: &crate::geometry::Element<T>,
    points: &[T],
) -> Result<T> {
    let d = problem.dim();
    if let Some(x) = points.chunks_exact(d).find(|x| !element.contains(x)) {
        return Err(Error::usage(format!(
            "point {x:?} lies outside element {}",
            element.index
        )));
    }
    let sq = interior_squared_residuals(net, problem, theta, points)?;
    Ok(localized_energy(element.measure, &sq))
}

/// `‖O_Ω(u_θ)(x)‖²` at each point, without gradients.
pub fn interior_squared_residuals<T: Scalar>(
    net: &(impl FieldModel<T> + ?Sized),
    problem: &PdeProblem,
    theta: &[T],
    coords: &[T],
) -> Result<Vec<T>> {
    let mut tape = Tape::new(theta);
    let u = net.forward_points(&mut tape, coords)?;
    let sq = squared_norm(&mut tape, problem, None, u, None, coords)?;
    Ok(tape.value(sq).values())
}

/// `Σ_i w_i ‖O_Ω(u_θ)(x_i)‖²` and its gradient in θ.
pub fn weighted_interior_energy<T: Scalar>(
    net: &(impl FieldModel<T> + ?Sized),
    problem: &PdeProblem,
    theta: &[T],
    coords: &[T],
    weights: &[T],
) -> Result<(T, Vec<T>)> {
    if coords.len() != weights.len() * problem.dim() {
        return Err(Error::usage("one weight per point is required"));
    }
    let mut tape = Tape::new(theta);
    let u = net.forward_points(&mut tape, coords)?;
    let sq = squared_norm(&mut tape, problem, None, u, None, coords)?;
    let w = tape.constant_column(weights.to_vec());
    let weighted = tape.mul(sq, w);
    let total = tape.sum(weighted);
    let value = tape.scalar(total);
    if !value.is_finite() {
        return Err(Error::non_finite("weighted interior energy", None));
    }
    Ok((value, tape.gradient(total)?))
}

/// Sum over components of squared residuals, as a plain `rows × 1` node.
fn squared_norm<T: Scalar>(
    tape: &mut Tape<'_, T>,
    problem: &PdeProblem,
    condition: Option<&Condition>,
    u: Var,
    partner: Option<Var>,
    coords: &[T],
) -> Result<Var> {
    let comps: Vec<Var> = match (condition, partner) {
        (Some(c), Some(v)) if c.op == ConditionOp::Periodic => (0..problem.out_dim())
            .map(|k| {
                let a = tape.channel(u, k, 0);
                let b = tape.channel(v, k, 0);
                tape.sub(a, b)
            })
            .collect(),
        (Some(c), _) if c.op == ConditionOp::Periodic => {
            return Err(Error::config(
                "periodic condition batch has no partner points",
            ))
        }
        (Some(c), _) => problem.condition_residual(
            c,
            &mut TapeField {
                tape,
                output: u,
                coords,
            },
        )?,
        (None, _) => problem.residual(&mut TapeField {
            tape,
            output: u,
            coords,
        }),
    };
    let mut acc: Option<Var> = None;
    for r in comps {
        let sq = tape.mul(r, r);
        acc = Some(match acc {
            None => sq,
            Some(a) => tape.add(a, sq),
        });
    }
    acc.ok_or_else(|| Error::config("problem has no output components"))
}

/// Checks that consecutive `set_size` rows share an element tag.
fn check_set_grouping<T: Scalar>(batch: &PointBatch<T>, s: usize, what: LossTerm) -> Result<()> {
    if !batch.len().is_multiple_of(s) {
        return Err(Error::config(format!(
            "{what:?} batch of {} points does not split into sets of {s}",
            batch.len()
        )));
    }
    for (g, chunk) in batch.elements().chunks(s).enumerate() {
        if chunk.iter().any(|e| *e != chunk[0]) {
            return Err(Error::config(format!(
                "{what:?} set {g} mixes points from different elements"
            )));
        }
    }
    Ok(())
}

/// Row weights and per-element bookkeeping for one batch.
struct RowWeights<T> {
    weights: Vec<T>,
    /// `(element, |E_k|/m_k, rows)` in ascending element order.
    groups: Vec<(usize, T, Vec<usize>)>,
}

fn localized_weights<T: Scalar>(b: &TermBatch<T>, k_total: usize) -> Result<RowWeights<T>> {
    let mut by_element: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for (i, e) in b.points.elements().iter().enumerate() {
        let e =
            e.ok_or_else(|| Error::config(format!("{:?} point {i} has no element tag", b.term)))?;
        by_element.entry(e).or_default().push(i);
    }
    let mut weights = vec![T::zero(); b.points.len()];
    let mut groups = Vec::with_capacity(by_element.len());
    let inv_k = T::one() / T::lit(k_total as f64);
    for (e, rows) in by_element {
        let measure = *b.element_measures.get(e).ok_or_else(|| {
            Error::config(format!(
                "{:?} batch lacks the measure of element {e}",
                b.term
            ))
        })?;
        let q = measure / T::lit(rows.len() as f64);
        for &r in &rows {
            weights[r] = q * inv_k;
        }
        groups.push((e, q, rows));
    }
    Ok(RowWeights { weights, groups })
}

fn distinct_elements<T: Scalar>(b: &TermBatch<T>) -> usize {
    let mut e: Vec<usize> = b.points.elements().iter().flatten().copied().collect();
    e.sort_unstable();
    e.dedup();
    e.len()
}

/// Shared evaluation for both weightings.
pub fn evaluate<T: Scalar>(
    net: &(impl FieldModel<T> + ?Sized),
    problem: &PdeProblem,
    theta: &[T],
    data: &TrainingData<T>,
    lambdas: &Lambdas,
    weighting: Weighting,
) -> Result<LossEval<T>> {
    validate_coverage(problem, data)?;
    let mut counts = [0usize; 4];
    for b in &data.batches {
        counts[b.term.index()] += match weighting {
            Weighting::Mean => b.points.len(),
            Weighting::Localized => distinct_elements(b),
        };
    }

    let mut tape = Tape::new(theta);
    let mut term_vars: [Option<Var>; 4] = [None; 4];
    let mut energies: Vec<(LossTerm, Vec<f64>)> = Vec::new();
    for b in data.batches.iter().filter(|b| !b.points.is_empty()) {
        if let Some(s) = net.set_size() {
            check_set_grouping(&b.points, s, b.term)?;
        }
        let coords = b.points.coords();
        let u = net.forward_points(&mut tape, coords)?;
        let v = match &b.partner {
            Some(p) => Some(net.forward_points(&mut tape, p.coords())?),
            None => None,
        };
        let sq = squared_norm(&mut tape, problem, b.condition.as_ref(), u, v, coords)?;
        let n = counts[b.term.index()];
        let weights = match weighting {
            Weighting::Mean => vec![T::one() / T::lit(n as f64); b.points.len()],
            Weighting::Localized => {
                let rw = localized_weights(b, n)?;
                let sq_vals = tape.value(sq).values();
                let e: Vec<f64> = rw
                    .groups
                    .iter()
                    .map(|(_, q, rows)| {
                        (*q * rows.iter().map(|&r| sq_vals[r]).sum::<T>()).to_f64_lossy()
                    })
                    .collect();
                match energies.iter_mut().find(|(t, _)| *t == b.term) {
                    Some((_, v)) => v.extend(e),
                    None => energies.push((b.term, e)),
                }
                rw.weights
            }
        };
        let w = tape.constant_column(weights);
        let weighted = tape.mul(sq, w);
        let part = tape.sum(weighted);
        let slot = &mut term_vars[b.term.index()];
        *slot = Some(match *slot {
            None => part,
            Some(a) => tape.add(a, part),
        });
    }

    let mut breakdown = LossBreakdown::default();
    let mut total: Option<Var> = None;
    for t in LossTerm::ALL {
        if let Some(v) = term_vars[t.index()] {
            breakdown.set(t, tape.scalar(v).to_f64_lossy());
            let sv = tape.scale(v, T::lit(lambdas.get(t)));
            total = Some(match total {
                None => sv,
                Some(a) => tape.add(a, sv),
            });
        }
    }
    let total = total.ok_or_else(|| Error::config("no collocation batches"))?;
    breakdown.total = tape.scalar(total).to_f64_lossy();
    breakdown.element_energies = energies;
    if !breakdown.total.is_finite() {
        return Err(Error::non_finite("loss evaluation", None));
    }
    let gradient = tape.gradient(total)?;
    Ok(LossEval {
        breakdown,
        gradient,
    })
}

/// Every required region has at least one point.
fn validate_coverage<T: Scalar>(problem: &PdeProblem, data: &TrainingData<T>) -> Result<()> {
    let has = |term: LossTerm| {
        data.batches
            .iter()
            .any(|b| b.term == term && !b.points.is_empty())
    };
    if !has(LossTerm::Interior) {
        return Err(Error::config("interior region has no collocation points"));
    }
    for c in problem.conditions() {
        let t = LossTerm::of_condition(c);
        if !has(t) {
            return Err(Error::config(format!(
                "required region {t:?} has no collocation points"
            )));
        }
    }
    Ok(())
}
