use serde::Serialize;

use super::field::ResidualField;
use crate::error::{Error, Result};

/// Largest grid the oracle will evaluate.
pub const MAX_ORACLE_POINTS: usize = 1 << 22;
/// Points per field call while sweeping a grid.
const SWEEP_CHUNK: usize = 1 << 14;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Quadrature {
    pub value: f64,
    /// Cells per axis of the finest grid used.
    pub resolution: usize,
    pub converged: bool,
}

/// Composite midpoint rule on `resolution` cells per axis over a box.
pub fn midpoint_rule(
    field: &dyn ResidualField,
    bounds: &[(f64, f64)],
    resolution: usize,
) -> Result<f64> {
    let d = bounds.len();
    if d != field.dim() {
        return Err(Error::usage("box and field dimensions differ"));
    }
    if resolution == 0 {
        return Err(Error::config("quadrature resolution must be >= 1"));
    }
    let total = resolution
        .checked_pow(d as u32)
        .filter(|&n| n <= MAX_ORACLE_POINTS)
        .ok_or_else(|| Error::config(format!("{resolution}^{d} quadrature points is too many")))?;
    let h: Vec<f64> = bounds
        .iter()
        .map(|(lo, hi)| (hi - lo) / resolution as f64)
        .collect();
    let cell: f64 = h.iter().product();
    let mut sum = CompensatedSum::default();
    let mut coords = Vec::with_capacity(SWEEP_CHUNK.min(total) * d);
    let mut idx = vec![0usize; d];
    for n in 0..total {
        for a in 0..d {
            coords.push(bounds[a].0 + (idx[a] as f64 + 0.5) * h[a]);
        }
        // odometer increment, last axis fastest
        for a in (0..d).rev() {
            idx[a] += 1;
            if idx[a] < resolution {
                break;
            }
            idx[a] = 0;
        }
        if coords.len() == SWEEP_CHUNK * d || n + 1 == total {
            field.eval_batch(&coords)?.iter().for_each(|v| sum.add(*v));
            coords.clear();
        }
    }
    Ok(sum.value() * cell)
}

/// Neumaier summation: error stays at a few ulps of the result regardless
/// of the number of terms.
#[derive(Clone, Copy, Debug, Default)]
pub(crate) struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub(crate) fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.carry += (self.sum - t) + v;
        } else {
            self.carry += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub(crate) fn value(&self) -> f64 {
        self.sum + self.carry
    }

    pub(crate) fn of(values: impl IntoIterator<Item = f64>) -> f64 {
        let mut s = Self::default();
        values.into_iter().for_each(|v| s.add(v));
        s.value()
    }
}

/// `∫ φ` over a box: midpoint rule with Richardson extrapolation
/// `(4 M(2r) − M(r)) / 3`, doubling `r` until two successive estimates
/// agree to `rel_tol`. Returns the best estimate with `converged = false`
/// when the grid cap is hit first.
pub fn oracle_integral(
    field: &dyn ResidualField,
    bounds: &[(f64, f64)],
    resolution: usize,
    rel_tol: f64,
) -> Result<Quadrature> {
    let fits = |r: usize| {
        r.checked_pow(bounds.len() as u32)
            .is_some_and(|n| n <= MAX_ORACLE_POINTS)
    };
    let mut r = resolution;
    let mut coarse = midpoint_rule(field, bounds, r)?;
    let mut prev: Option<f64> = None;
    while fits(2 * r) {
        let fine = midpoint_rule(field, bounds, 2 * r)?;
        r *= 2;
        let rich = (4.0 * fine - coarse) / 3.0;
        let agree = |a: f64, b: f64| (a - b).abs() <= rel_tol * a.abs().max(b.abs()) || a == b;
        // an exact rule (piecewise-constant on an aligned grid) stops at once
        if agree(fine, coarse) {
            return Ok(Quadrature {
                value: fine,
                resolution: r,
                converged: true,
            });
        }
        if let Some(p) = prev {
            if agree(rich, p) {
                return Ok(Quadrature {
                    value: rich,
                    resolution: r,
                    converged: true,
                });
            }
        }
        prev = Some(rich);
        coarse = fine;
    }
    Ok(Quadrature {
        value: prev.unwrap_or(coarse),
        resolution: r,
        converged: false,
    })
}
