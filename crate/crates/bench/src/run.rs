use std::fs;
use std::io::BufWriter;
use std::path::Path;
use std::time::Instant;

use serde::Serialize;
use setpinn::geometry::partition_uniform;
use setpinn::losses::{evaluate, sample_training_data};
use setpinn::models::{read_checkpoint, write_checkpoint, Network};
use setpinn::optim::{train, write_metrics_csv, TrainedModel};

use crate::config::RunConfig;
use crate::error::{BenchError, Result};
use crate::eval::{evaluate_model, EvalResult, FieldEval, FinalLoss};

pub const CHECKPOINT: &str = "checkpoint.bin";
pub const METRICS: &str = "metrics.csv";
pub const EVAL: &str = "eval.json";
pub const FIELD: &str = "field.csv";

pub struct RunOutcome {
    pub trained: TrainedModel,
    pub field: FieldEval,
    pub result: EvalResult,
}

pub fn run_training(cfg: &RunConfig) -> Result<RunOutcome> {
    let clock = Instant::now();
    let trained = train(&cfg.problem, &cfg.train, cfg.seed)?;
    let runtime_ms = if cfg.train.record_wall_time {
        clock.elapsed().as_millis() as u64
    } else {
        0
    };
    let field = evaluate_model(
        &cfg.problem,
        &trained.network,
        trained.theta.as_slice(),
        Some(&trained.partition),
        cfg.eval_resolution,
    )?;
    let result = eval_result(
        cfg,
        &trained.network,
        &field,
        FinalLoss::from(&trained.final_loss),
        runtime_ms,
    );
    Ok(RunOutcome {
        trained,
        field,
        result,
    })
}

fn eval_result(
    cfg: &RunConfig,
    net: &Network,
    field: &FieldEval,
    final_loss: FinalLoss,
    runtime_ms: u64,
) -> EvalResult {
    let (max_abs_error, mean_abs_error) = EvalResult::summary(field);
    EvalResult {
        name: cfg.name.clone(),
        problem: cfg.problem.name().to_string(),
        method: cfg.method().to_string(),
        sampler: cfg.sampler().to_string(),
        profile: cfg.profile.to_string(),
        seed: cfg.seed,
        rrmse: field.score.rrmse,
        rmse: field.score.rmse,
        zero_truth: field.score.zero_truth,
        max_abs_error,
        mean_abs_error,
        grid: field.grid.clone(),
        runtime_ms,
        final_loss,
        num_params: net.num_params(),
    }
}

pub fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| BenchError::io(format!("creating {}", dir.display()), e))
}

fn create(path: &Path) -> Result<BufWriter<fs::File>> {
    fs::File::create(path)
        .map(BufWriter::new)
        .map_err(|e| BenchError::io(format!("creating {}", path.display()), e))
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| BenchError::io(format!("writing {}", path.display()), e))
}

pub fn write_eval(dir: &Path, result: &EvalResult, field: &FieldEval) -> Result<()> {
    write_json(&dir.join(EVAL), result)?;
    field.write_csv(create(&dir.join(FIELD))?)
}

/// Checkpoint, metrics, evaluation record and field dump.
pub fn write_artifacts(dir: &Path, run: &RunOutcome) -> Result<()> {
    create_dir(dir)?;
    write_checkpoint(
        run.trained.network.layout(),
        &run.trained.theta,
        create(&dir.join(CHECKPOINT))?,
    )?;
    write_metrics_csv(&run.trained.metrics, create(&dir.join(METRICS))?)?;
    write_eval(dir, &run.result, &run.field)
}

/// Re-scores a saved checkpoint. Losses are recomputed on the run's
/// initial collocation draw, which is the training set for every sampler
/// except RAD.
pub fn evaluate_checkpoint(cfg: &RunConfig, checkpoint: &Path) -> Result<(EvalResult, FieldEval)> {
    let net = Network::new(&cfg.train.arch)?;
    let file = fs::File::open(checkpoint)
        .map_err(|e| BenchError::io(format!("opening {}", checkpoint.display()), e))?;
    let theta = read_checkpoint::<f64, _>(net.layout(), std::io::BufReader::new(file))?;
    let partition = partition_uniform(&cfg.problem.domain::<f64>(), &cfg.train.sampling.cells)?;
    let field = evaluate_model(
        &cfg.problem,
        &net,
        theta.as_slice(),
        Some(&partition),
        cfg.eval_resolution,
    )?;
    let data = sample_training_data(&cfg.problem, &cfg.train.sampling, cfg.seed, None)?;
    let loss = evaluate(
        &net,
        &cfg.problem,
        theta.as_slice(),
        &data,
        &cfg.train.lambdas,
        cfg.method().weighting(),
    )?;
    let result = eval_result(cfg, &net, &field, FinalLoss::from(&loss.breakdown), 0);
    Ok((result, field))
}
