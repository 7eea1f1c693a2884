use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use setpinn::losses::Sampler;
use setpinn::models::ArchConfig;
use setpinn::optim::{Method, TrainConfig};

use crate::config::{RunConfig, Sweep};
use crate::error::{BenchError, Result};
use crate::run::run_training;

/// Collocation grid points per axis shared by every element-size setting.
pub const ELEMENT_GRID: usize = 16;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub sweep: String,
    pub value: String,
    pub seed: u64,
    pub problem: String,
    pub method: String,
    pub sampler: String,
    pub rrmse: f64,
    pub final_loss: f64,
}

pub fn default_values(sweep: Sweep) -> Vec<String> {
    let v: &[&str] = match sweep {
        Sweep::ElementSize | Sweep::Heads => &["2", "4", "8"],
        Sweep::Blocks => &["1", "2"],
        Sweep::Sampler => &["eas", "gus", "lhs", "rad"],
    };
    v.iter().map(|s| s.to_string()).collect()
}

fn number(sweep: Sweep, value: &str) -> Result<usize> {
    match value.parse::<usize>() {
        Ok(n) if n >= 1 => Ok(n),
        _ => Err(BenchError::config(format!(
            "{sweep} setting {value:?} must be a positive integer"
        ))),
    }
}

/// `base` with one sweep setting applied.
///
/// An element of size `n` spans `n` collocation spacings per axis of a
/// fixed `ELEMENT_GRID`-point grid, so the interior point count stays
/// fixed while each set grows to `n^d` points.
pub fn apply_setting(base: &TrainConfig, sweep: Sweep, value: &str) -> Result<TrainConfig> {
    let mut t = base.clone();
    match sweep {
        Sweep::Sampler => t.sampling.sampler = value.parse::<Sampler>()?,
        Sweep::ElementSize | Sweep::Heads | Sweep::Blocks => {
            let n = number(sweep, value)?;
            let dim = t.sampling.cells.len();
            let ArchConfig::Setpinn(c) = &mut t.arch else {
                return Err(BenchError::config(format!(
                    "the {sweep} sweep needs method = setpinn"
                )));
            };
            match sweep {
                Sweep::Heads => c.heads = n,
                Sweep::Blocks => c.blocks = n,
                _ => {
                    if !ELEMENT_GRID.is_multiple_of(n) {
                        return Err(BenchError::config(format!(
                            "element size {n} does not divide {ELEMENT_GRID}"
                        )));
                    }
                    let set = n.pow(dim as u32);
                    c.set_size = set;
                    t.sampling.cells = vec![ELEMENT_GRID / n; dim];
                    t.sampling.points_per_element = set;
                    t.sampling.face_points_per_element = set;
                }
            }
        }
    }
    Ok(t)
}

/// One training run per (setting, seed), settings outermost.
pub fn run_ablation(
    cfg: &RunConfig,
    sweep: Sweep,
    values: &[String],
    seeds: &[u64],
) -> Result<Vec<AblationRow>> {
    let mut settings = Vec::with_capacity(values.len());
    for v in values {
        let t = apply_setting(&cfg.train, sweep, v)?;
        t.validate(&cfg.problem)?;
        settings.push((v, t));
    }
    let mut rows = Vec::with_capacity(values.len() * seeds.len());
    for (value, train) in settings {
        for &seed in seeds {
            let run_cfg = RunConfig {
                seed,
                train: train.clone(),
                ..cfg.clone()
            };
            let out = run_training(&run_cfg)?;
            rows.push(AblationRow {
                sweep: sweep.to_string(),
                value: value.clone(),
                seed,
                problem: cfg.problem.name().to_string(),
                method: Method::of(&train.arch).to_string(),
                sampler: train.sampling.sampler.to_string(),
                rrmse: out.result.rrmse,
                final_loss: out.result.final_loss.total,
            });
        }
    }
    Ok(rows)
}

pub fn write_rows_csv<W: Write>(rows: &[AblationRow], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(out);
    w.write_record([
        "sweep",
        "value",
        "seed",
        "problem",
        "method",
        "sampler",
        "rrmse",
        "final_loss",
    ])?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()
        .map_err(|e| BenchError::io("writing ablation table", e))
}

pub fn read_rows_csv<R: Read>(input: R) -> Result<Vec<AblationRow>> {
    let mut r = csv::Reader::from_reader(input);
    let rows = r
        .deserialize()
        .collect::<std::result::Result<Vec<AblationRow>, _>>()?;
    Ok(rows)
}

pub fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    match n {
        0 => f64::NAN,
        _ if n % 2 == 1 => values[n / 2],
        _ => 0.5 * (values[n / 2 - 1] + values[n / 2]),
    }
}

/// Median rRMSE per setting, in first-seen order.
pub fn medians(rows: &[AblationRow]) -> Vec<(String, f64)> {
    let mut order: Vec<String> = Vec::new();
    for r in rows {
        if !order.contains(&r.value) {
            order.push(r.value.clone());
        }
    }
    order
        .into_iter()
        .map(|v| {
            let mut x: Vec<f64> = rows
                .iter()
                .filter(|r| r.value == v)
                .map(|r| r.rrmse)
                .collect();
            (v, median(&mut x))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use setpinn::optim::Profile;
    use setpinn::pde::reaction_problem;

    #[test]
    fn element_size_keeps_interior_count() {
        let p = reaction_problem();
        let base = TrainConfig::preset(&p, Method::Setpinn, Sampler::Eas, Profile::Desk);
        for n in [2usize, 4, 8] {
            let t = apply_setting(&base, Sweep::ElementSize, &n.to_string()).unwrap();
            t.validate(&p).unwrap();
            let cells: usize = t.sampling.cells.iter().product();
            assert_eq!(
                cells * t.sampling.points_per_element,
                ELEMENT_GRID * ELEMENT_GRID
            );
            match &t.arch {
                ArchConfig::Setpinn(c) => assert_eq!(c.set_size, n * n),
                _ => unreachable!(),
            }
        }
        assert!(apply_setting(&base, Sweep::ElementSize, "3").is_err());
        let pinn = TrainConfig::preset(&p, Method::Pinn, Sampler::Gus, Profile::Desk);
        assert!(apply_setting(&pinn, Sweep::Heads, "2").is_err());
        assert!(apply_setting(&pinn, Sweep::Sampler, "nope").is_err());
    }

    #[test]
    fn medians_and_csv() {
        let row = |v: &str, seed, rrmse| AblationRow {
            sweep: "heads".into(),
            value: v.into(),
            seed,
            problem: "p".into(),
            method: "setpinn".into(),
            sampler: "eas".into(),
            rrmse,
            final_loss: 0.5,
        };
        let rows = vec![
            row("2", 0, 0.3),
            row("2", 1, 0.1),
            row("2", 2, 0.2),
            row("4", 0, 1.0),
            row("4", 1, 3.0),
        ];
        assert_eq!(
            medians(&rows),
            vec![("2".to_string(), 0.2), ("4".to_string(), 2.0)]
        );
        let mut buf = Vec::new();
        write_rows_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("sweep,value,seed,problem,method,sampler,rrmse,final_loss\n"));
        assert_eq!(read_rows_csv(&buf[..]).unwrap(), rows);
    }
}
