use crate::error::{Error, Result};
use crate::geometry::{Partition, Rng};
use crate::losses::interior_squared_residuals;
use crate::models::Network;
use crate::pde::PdeProblem;
use rand::Rng as _;

/// A non-negative integrand `φ(x)`, typically a squared PDE residual.
pub trait ResidualField {
    fn dim(&self) -> usize;
    /// `φ` at each row of the row-major `coords`.
    fn eval_batch(&self, coords: &[f64]) -> Result<Vec<f64>>;
}

/// A closure field.
pub struct FnField<F> {
    pub dim: usize,
    pub f: F,
}

impl<F: Fn(&[f64]) -> f64> ResidualField for FnField<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval_batch(&self, coords: &[f64]) -> Result<Vec<f64>> {
        Ok(coords.chunks_exact(self.dim).map(|x| (self.f)(x)).collect())
    }
}

pub struct ConstantField {
    pub dim: usize,
    pub value: f64,
}

impl ResidualField for ConstantField {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval_batch(&self, coords: &[f64]) -> Result<Vec<f64>> {
        Ok(vec![self.value; coords.len() / self.dim])
    }
}

/// One value per element of a partition.
pub struct PiecewiseConstantField {
    pub partition: Partition<f64>,
    pub values: Vec<f64>,
}

impl ResidualField for PiecewiseConstantField {
    fn dim(&self) -> usize {
        self.partition.domain().dim()
    }

    fn eval_batch(&self, coords: &[f64]) -> Result<Vec<f64>> {
        coords
            .chunks_exact(self.dim())
            .map(|x| {
                self.partition
                    .locate(x)
                    .map(|k| self.values[k])
                    .ok_or_else(|| {
                        Error::usage(format!("point {x:?} lies outside the field's partition"))
                    })
            })
            .collect()
    }
}

/// `φ = a_k + g_k·(x − c_k)` on element `k`, with `a_k` large enough
/// that `φ ≥ 0` everywhere; the element integral is `a_k |E_k|`.
pub struct PiecewiseLinearField {
    pub partition: Partition<f64>,
    pub base: Vec<f64>,
    pub slopes: Vec<Vec<f64>>,
}

impl PiecewiseLinearField {
    pub fn random(partition: Partition<f64>, rng: &mut Rng) -> Self {
        let d = partition.domain().dim();
        let mut base = Vec::new();
        let mut slopes = Vec::new();
        for e in partition.elements() {
            let g: Vec<f64> = (0..d).map(|_| rng.gen_range(-4.0..4.0)).collect();
            let reach: f64 = g
                .iter()
                .zip(&e.bounds)
                .map(|(gi, (lo, hi))| gi.abs() * (hi - lo) / 2.0)
                .sum();
            // heavy-tailed levels make the field strongly heterogeneous
            let level: f64 = rng.gen_range(0.0f64..1.0).powi(3) * 10.0;
            base.push(reach + level);
            slopes.push(g);
        }
        Self {
            partition,
            base,
            slopes,
        }
    }

    /// Exact element integrals `a_k |E_k|`.
    pub fn element_integrals(&self) -> Vec<f64> {
        self.partition
            .elements()
            .iter()
            .map(|e| self.base[e.index] * e.measure)
            .collect()
    }
}

impl ResidualField for PiecewiseLinearField {
    fn dim(&self) -> usize {
        self.partition.domain().dim()
    }

    fn eval_batch(&self, coords: &[f64]) -> Result<Vec<f64>> {
        coords
            .chunks_exact(self.dim())
            .map(|x| {
                let k = self.partition.locate(x).ok_or_else(|| {
                    Error::usage(format!("point {x:?} lies outside the field's partition"))
                })?;
                let c = self.partition.elements()[k].centroid();
                let lin: f64 = self.slopes[k]
                    .iter()
                    .zip(x.iter().zip(&c))
                    .map(|(g, (a, b))| g * (a - b))
                    .sum();
                Ok(self.base[k] + lin)
            })
            .collect()
    }
}

/// `floor + exp(−‖x − center‖² / 2σ²)`: most of the mass sits in one
/// small region.
pub struct BumpField {
    pub center: Vec<f64>,
    pub sigma: f64,
    pub floor: f64,
}

impl ResidualField for BumpField {
    fn dim(&self) -> usize {
        self.center.len()
    }

    fn eval_batch(&self, coords: &[f64]) -> Result<Vec<f64>> {
        let s2 = 2.0 * self.sigma * self.sigma;
        Ok(coords
            .chunks_exact(self.dim())
            .map(|x| {
                let r2: f64 = x
                    .iter()
                    .zip(&self.center)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                self.floor + (-r2 / s2).exp()
            })
            .collect())
    }
}

/// Rows per tape when evaluating a network residual.
const MODEL_CHUNK: usize = 2048;

/// Squared interior residual of a frozen pointwise network.
pub struct ModelResidualField<'a> {
    net: &'a Network,
    problem: &'a PdeProblem,
    theta: &'a [f64],
}

impl<'a> ModelResidualField<'a> {
    pub fn new(net: &'a Network, problem: &'a PdeProblem, theta: &'a [f64]) -> Result<Self> {
        if net.set_size().is_some() {
            return Err(Error::usage(
                "a set network's residual depends on how points are grouped; use a pointwise network",
            ));
        }
        if net.in_dim() != problem.dim() {
            return Err(Error::config("network and problem dimensions differ"));
        }
        Ok(Self {
            net,
            problem,
            theta,
        })
    }
}

impl ResidualField for ModelResidualField<'_> {
    fn dim(&self) -> usize {
        self.problem.dim()
    }

    fn eval_batch(&self, coords: &[f64]) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(coords.len() / self.dim());
        for chunk in coords.chunks(MODEL_CHUNK * self.dim()) {
            out.extend(interior_squared_residuals(
                self.net,
                self.problem,
                self.theta,
                chunk,
            )?);
        }
        Ok(out)
    }
}
