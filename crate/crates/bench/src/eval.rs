//! Test-grid evaluation and relative RMSE.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use setpinn::geometry::{fmt_real, Partition};
use setpinn::losses::LossBreakdown;
use setpinn::models::{predict_values, Network};
use setpinn::pde::PdeProblem;

use crate::error::{BenchError, Result};

/// Uniform tensor grid including the domain boundary, last axis fastest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub resolution: usize,
    pub points: usize,
    pub bounds: Vec<(f64, f64)>,
}

impl GridSpec {
    pub fn new(bounds: &[(f64, f64)], resolution: usize) -> Self {
        Self {
            resolution,
            points: resolution.pow(bounds.len() as u32),
            bounds: bounds.to_vec(),
        }
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    /// Flat row-major coordinates.
    pub fn coords(&self) -> Vec<f64> {
        let (d, n) = (self.dim(), self.resolution);
        let axis = |a: usize, i: usize| {
            let (lo, hi) = self.bounds[a];
            match i {
                0 => lo,
                _ if i == n - 1 => hi,
                _ => lo + (hi - lo) * i as f64 / (n - 1) as f64,
            }
        };
        let mut out = Vec::with_capacity(self.points * d);
        for k in 0..self.points {
            let mut rem = k;
            let mut idx = vec![0; d];
            for a in (0..d).rev() {
                idx[a] = rem % n;
                rem /= n;
            }
            out.extend(idx.iter().enumerate().map(|(a, &i)| axis(a, i)));
        }
        out
    }
}

/// `sqrt(Σ(ŷ−y)² / Σy²)`; with an all-zero truth the absolute RMSE is
/// reported instead and `zero_truth` is set.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rrmse {
    pub rrmse: f64,
    pub rmse: f64,
    pub zero_truth: bool,
}

pub fn rrmse(pred: &[f64], truth: &[f64]) -> Result<Rrmse> {
    if pred.len() != truth.len() || pred.is_empty() {
        return Err(BenchError::config(format!(
            "prediction has {} values, truth has {}",
            pred.len(),
            truth.len()
        )));
    }
    if let Some(i) = pred.iter().position(|v| !v.is_finite()) {
        return Err(
            setpinn::Error::non_finite(format!("prediction at test point {i}"), None).into(),
        );
    }
    let err2: f64 = pred.iter().zip(truth).map(|(p, y)| (p - y) * (p - y)).sum();
    let norm2: f64 = truth.iter().map(|y| y * y).sum();
    let rmse = (err2 / pred.len() as f64).sqrt();
    Ok(if norm2 == 0.0 {
        Rrmse {
            rrmse: rmse,
            rmse,
            zero_truth: true,
        }
    } else {
        Rrmse {
            rrmse: (err2 / norm2).sqrt(),
            rmse,
            zero_truth: false,
        }
    })
}

/// Predictions and reference values on a test grid.
#[derive(Clone, Debug)]
pub struct FieldEval {
    pub grid: GridSpec,
    pub coords: Vec<f64>,
    pub pred: Vec<f64>,
    pub truth: Vec<f64>,
    pub score: Rrmse,
}

impl FieldEval {
    pub fn from_predictions(
        problem: &PdeProblem,
        grid: GridSpec,
        coords: Vec<f64>,
        pred: Vec<f64>,
    ) -> Result<Self> {
        let truth: Vec<f64> = coords
            .chunks_exact(grid.dim())
            .map(|x| problem.solution(x))
            .collect();
        let score = rrmse(&pred, &truth)?;
        Ok(Self {
            grid,
            coords,
            pred,
            truth,
            score,
        })
    }

    pub fn abs_errors(&self) -> Vec<f64> {
        self.pred
            .iter()
            .zip(&self.truth)
            .map(|(p, y)| (p - y).abs())
            .collect()
    }

    /// `x0,…,u_pred,u_true,abs_err`, one row per grid point.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let d = self.grid.dim();
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<String> = (0..d).map(|i| format!("x{i}")).collect();
        header.extend(["u_pred", "u_true", "abs_err"].map(String::from));
        w.write_record(&header)?;
        for (i, x) in self.coords.chunks_exact(d).enumerate() {
            let mut rec: Vec<String> = x.iter().map(|v| fmt_real(*v)).collect();
            let (p, y) = (self.pred[i], self.truth[i]);
            rec.extend([fmt_real(p), fmt_real(y), fmt_real((p - y).abs())]);
            w.write_record(&rec)?;
        }
        w.flush()
            .map_err(|e| BenchError::io("writing field dump", e))
    }
}

/// A re-parsed field dump.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldDump {
    pub dim: usize,
    pub rows: Vec<Vec<f64>>,
}

pub fn read_field_csv<R: Read>(input: R) -> Result<FieldDump> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers()?.clone();
    let n = header.len();
    let tail: Vec<&str> = header.iter().skip(n.saturating_sub(3)).collect();
    if n < 4 || tail != ["u_pred", "u_true", "abs_err"] {
        return Err(
            setpinn::Error::Parse("field CSV must end with u_pred,u_true,abs_err".into()).into(),
        );
    }
    let dim = n - 3;
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let row = rec
            .iter()
            .map(|v| v.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|_| setpinn::Error::Parse(format!("field CSV row {}: bad number", i + 2)))?;
        rows.push(row);
    }
    Ok(FieldDump { dim, rows })
}

pub fn evaluate_model(
    problem: &PdeProblem,
    net: &Network,
    theta: &[f64],
    partition: Option<&Partition<f64>>,
    resolution: usize,
) -> Result<FieldEval> {
    let grid = GridSpec::new(problem.bounds(), resolution);
    let coords = grid.coords();
    let pred = predict_values(net, theta, &coords, partition)?;
    FieldEval::from_predictions(problem, grid, coords, pred)
}

/// Scores an arbitrary predictor, e.g. the analytic solution itself.
pub fn evaluate_fn(
    problem: &PdeProblem,
    resolution: usize,
    f: impl Fn(&[f64]) -> f64,
) -> Result<FieldEval> {
    let grid = GridSpec::new(problem.bounds(), resolution);
    let coords = grid.coords();
    let pred = coords.chunks_exact(grid.dim()).map(f).collect();
    FieldEval::from_predictions(problem, grid, coords, pred)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FinalLoss {
    pub interior: f64,
    pub initial: f64,
    pub initial_dt: f64,
    pub boundary: f64,
    pub total: f64,
}

impl From<&LossBreakdown> for FinalLoss {
    fn from(b: &LossBreakdown) -> Self {
        Self {
            interior: b.interior,
            initial: b.initial,
            initial_dt: b.initial_dt,
            boundary: b.boundary,
            total: b.total,
        }
    }
}

/// The `eval.json` record. Per-point errors live in the field dump.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub name: String,
    pub problem: String,
    pub method: String,
    pub sampler: String,
    pub profile: String,
    pub seed: u64,
    pub rrmse: f64,
    pub rmse: f64,
    pub zero_truth: bool,
    pub max_abs_error: f64,
    pub mean_abs_error: f64,
    pub grid: GridSpec,
    /// Training wall time; 0 unless wall-clock recording is enabled.
    pub runtime_ms: u64,
    pub final_loss: FinalLoss,
    pub num_params: usize,
}

impl EvalResult {
    pub fn summary(field: &FieldEval) -> (f64, f64) {
        let e = field.abs_errors();
        let max = e.iter().cloned().fold(0.0, f64::max);
        (max, e.iter().sum::<f64>() / e.len() as f64)
    }
}
