//! Re-parsing of every artifact the CLI writes.

use std::fs;
use std::path::Path;

use serde::Deserialize;
use setpinn::geometry::read_points_csv;
use setpinn::optim::MetricRow;

use crate::ablate::read_rows_csv;
use crate::error::{BenchError, Result};
use crate::eval::{read_field_csv, EvalResult};

/// Schema of one theory report, read back strictly.
#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportRecord {
    pub experiment: String,
    #[serde(rename = "I")]
    pub integral: f64,
    pub mean_eas: f64,
    pub var_eas: f64,
    pub mean_gus: f64,
    pub var_gus: f64,
    pub coverage_eas: f64,
    pub coverage_gus: f64,
    pub trace_cov_eas: Option<f64>,
    pub trace_cov_gus: Option<f64>,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Artifact {
    Eval(EvalResult),
    TheoryReports(Vec<ReportRecord>),
    TheoryDetails(serde_json::Map<String, serde_json::Value>),
    Metrics(Vec<MetricRow>),
    Field { dim: usize, rows: usize },
    Points { dim: usize, rows: usize },
    Ablation(Vec<crate::ablate::AblationRow>),
    Checkpoint { params: usize },
}

impl Artifact {
    pub fn summary(&self) -> String {
        match self {
            Artifact::Eval(e) => format!(
                "eval: {} {} {} seed {} rrmse {:.6e} on {} points",
                e.problem, e.method, e.sampler, e.seed, e.rrmse, e.grid.points
            ),
            Artifact::TheoryReports(r) => {
                let pass = r.iter().filter(|x| x.pass).count();
                format!("theory reports: {pass}/{} pass", r.len())
            }
            Artifact::TheoryDetails(m) => format!("theory details: {} entries", m.len()),
            Artifact::Metrics(m) => format!(
                "metrics: {} rows, last loss {:.6e}",
                m.len(),
                m.last().map_or(f64::NAN, |r| r.total_loss)
            ),
            Artifact::Field { dim, rows } => {
                format!("field dump: {rows} points in {dim} dimensions")
            }
            Artifact::Points { dim, rows } => {
                format!("point batch: {rows} points in {dim} dimensions")
            }
            Artifact::Ablation(r) => format!("ablation table: {} rows", r.len()),
            Artifact::Checkpoint { params } => format!("checkpoint: {params} parameters"),
        }
    }
}

const METRICS_HEADER: &str = "step,stage,total_loss,grad_norm,wall_ms";

fn parse_error(path: &Path, msg: impl std::fmt::Display) -> BenchError {
    setpinn::Error::Parse(format!("{}: {msg}", path.display())).into()
}

/// Identifies an artifact by extension and header, then parses it fully.
pub fn inspect(path: &Path) -> Result<Artifact> {
    let bytes =
        fs::read(path).map_err(|e| BenchError::io(format!("reading {}", path.display()), e))?;
    let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("");
    match ext {
        "json" => inspect_json(path, &bytes),
        "csv" => inspect_csv(path, &bytes),
        "bin" => {
            // 32-byte layout digest, then little-endian f64 values
            if bytes.len() < 32 || (bytes.len() - 32) % 8 != 0 {
                return Err(parse_error(
                    path,
                    "not a checkpoint (digest plus whole f64 values)",
                ));
            }
            Ok(Artifact::Checkpoint {
                params: (bytes.len() - 32) / 8,
            })
        }
        _ => Err(parse_error(
            path,
            "unknown artifact type (expected .json, .csv or .bin)",
        )),
    }
}

fn inspect_json(path: &Path, bytes: &[u8]) -> Result<Artifact> {
    let value: serde_json::Value =
        serde_json::from_slice(bytes).map_err(|e| parse_error(path, e))?;
    match value {
        serde_json::Value::Array(_) => serde_json::from_value(value)
            .map(Artifact::TheoryReports)
            .map_err(|e| parse_error(path, e)),
        serde_json::Value::Object(m) if m.contains_key("rrmse") => {
            serde_json::from_value(serde_json::Value::Object(m))
                .map(Artifact::Eval)
                .map_err(|e| parse_error(path, e))
        }
        serde_json::Value::Object(m) => Ok(Artifact::TheoryDetails(m)),
        _ => Err(parse_error(path, "unexpected JSON document")),
    }
}

fn inspect_csv(path: &Path, bytes: &[u8]) -> Result<Artifact> {
    let header = bytes.split(|&b| b == b'\n').next().unwrap_or(&[]);
    let header = String::from_utf8_lossy(header);
    let header = header.trim_end();
    if header == METRICS_HEADER {
        let mut r = csv::Reader::from_reader(bytes);
        let rows = r
            .deserialize()
            .collect::<std::result::Result<Vec<MetricRow>, _>>()?;
        return Ok(Artifact::Metrics(rows));
    }
    if header.starts_with("sweep,") {
        return Ok(Artifact::Ablation(read_rows_csv(bytes)?));
    }
    if header.ends_with("u_pred,u_true,abs_err") {
        let d = read_field_csv(bytes)?;
        return Ok(Artifact::Field {
            dim: d.dim,
            rows: d.rows.len(),
        });
    }
    if header.ends_with("element,region") {
        let b = read_points_csv::<f64, _>(bytes)?;
        return Ok(Artifact::Points {
            dim: b.dim(),
            rows: b.len(),
        });
    }
    Err(parse_error(
        path,
        format!("unrecognized CSV header {header:?}"),
    ))
}
