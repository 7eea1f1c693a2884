use std::cell::RefCell;
use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::adam::{adam_step, AdamConfig, AdamState};
use super::lbfgs::{lbfgs_minimize_with, norm, LbfgsConfig, Termination};
use crate::diff::ParamVector;
use crate::error::{Error, Result};
use crate::geometry::{
    fmt_real, partition_uniform, rng_for, stream_id, Partition, PointBatch, RadConfig,
};
use crate::losses::{
    evaluate, interior_squared_residuals, sample_training_data, Lambdas, LossBreakdown, Sampler,
    SamplingPlan, TrainingData, Weighting,
};
use crate::models::{init_params, ArchConfig, MlpConfig, Network, SetPinnConfig};
use crate::pde::PdeProblem;

/// Stream family for parameter initialization.
const INIT_STREAM: u32 = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Pinn,
    Fls,
    Qres,
    Setpinn,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Pinn, Method::Fls, Method::Qres, Method::Setpinn];

    pub fn of(arch: &ArchConfig) -> Self {
        match arch {
            ArchConfig::Pinn(_) => Method::Pinn,
            ArchConfig::Fls(_) => Method::Fls,
            ArchConfig::Qres(_) => Method::Qres,
            ArchConfig::Setpinn(_) => Method::Setpinn,
        }
    }

    /// Set networks train on the localized loss, pointwise ones on the mean.
    pub fn weighting(self) -> Weighting {
        match self {
            Method::Setpinn => Weighting::Localized,
            _ => Weighting::Mean,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Pinn => "pinn",
            Method::Fls => "fls",
            Method::Qres => "qres",
            Method::Setpinn => "setpinn",
        })
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pinn" => Ok(Method::Pinn),
            "fls" => Ok(Method::Fls),
            "qres" => Ok(Method::Qres),
            "setpinn" => Ok(Method::Setpinn),
            _ => Err(Error::config(format!(
                "unknown method {s:?}; expected pinn, fls, qres or setpinn"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    /// Small widths and point counts for a single CPU core.
    Desk,
    /// Published widths, point counts and iteration budgets.
    Full,
}

impl fmt::Display for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Profile::Desk => "desk",
            Profile::Full => "full",
        })
    }
}

impl FromStr for Profile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "desk" => Ok(Profile::Desk),
            "full" => Ok(Profile::Full),
            _ => Err(Error::config(format!(
                "unknown profile {s:?}; expected desk or full"
            ))),
        }
    }
}

/// Architecture for `method` at the given profile.
pub fn preset_arch(method: Method, profile: Profile, in_dim: usize, out_dim: usize) -> ArchConfig {
    match (method, profile) {
        (Method::Pinn, Profile::Full) => ArchConfig::Pinn(MlpConfig::pinn_default(in_dim, out_dim)),
        (Method::Fls, Profile::Full) => ArchConfig::Fls(MlpConfig::pinn_default(in_dim, out_dim)),
        (Method::Qres, Profile::Full) => ArchConfig::Qres(MlpConfig::qres_default(in_dim, out_dim)),
        (Method::Setpinn, Profile::Full) => {
            ArchConfig::Setpinn(SetPinnConfig::reference_default(in_dim, out_dim))
        }
        (Method::Pinn, Profile::Desk) => {
            ArchConfig::Pinn(MlpConfig::new(in_dim, out_dim, vec![64; 3]))
        }
        (Method::Fls, Profile::Desk) => {
            ArchConfig::Fls(MlpConfig::new(in_dim, out_dim, vec![64; 3]))
        }
        (Method::Qres, Profile::Desk) => {
            ArchConfig::Qres(MlpConfig::new(in_dim, out_dim, vec![40; 4]))
        }
        (Method::Setpinn, Profile::Desk) => ArchConfig::Setpinn(SetPinnConfig {
            mixer_hidden: vec![32],
            ffn_hidden: vec![64],
            probe_hidden: vec![64, 64],
            ..SetPinnConfig::reference_default(in_dim, out_dim)
        }),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub arch: ArchConfig,
    pub sampling: SamplingPlan,
    pub lambdas: Lambdas,
    pub adam: AdamConfig,
    pub adam_iters: usize,
    /// `lbfgs.max_iters` is the L-BFGS iteration budget.
    pub lbfgs: LbfgsConfig,
    /// Record wall-clock times; off keeps every artifact reproducible.
    pub record_wall_time: bool,
}

impl TrainConfig {
    /// Iterations, widths and collocation sizes for `method` on `problem`.
    pub fn preset(
        problem: &PdeProblem,
        method: Method,
        sampler: Sampler,
        profile: Profile,
    ) -> Self {
        let d = problem.dim();
        let (per_axis, points) = match (profile, d) {
            (Profile::Full, 3) => (25, 8),
            (Profile::Full, _) => (25, 4),
            (Profile::Desk, 3) => (4, 8),
            (Profile::Desk, _) => (8, 4),
        };
        let lbfgs_iters = match profile {
            Profile::Full => 2000,
            Profile::Desk => 500,
        };
        Self {
            arch: preset_arch(method, profile, d, problem.out_dim()),
            sampling: SamplingPlan {
                sampler,
                cells: vec![per_axis; d],
                points_per_element: points,
                face_points_per_element: 4,
                rad: RadConfig::default(),
            },
            lambdas: Lambdas::default(),
            adam: AdamConfig::default(),
            adam_iters: 100,
            lbfgs: LbfgsConfig {
                max_iters: lbfgs_iters,
                tol: 1e-9,
                ..LbfgsConfig::default()
            },
            record_wall_time: false,
        }
    }

    pub fn method(&self) -> Method {
        Method::of(&self.arch)
    }

    pub fn validate(&self, problem: &PdeProblem) -> Result<()> {
        let net_dim = match &self.arch {
            ArchConfig::Pinn(c) | ArchConfig::Fls(c) | ArchConfig::Qres(c) => c.in_dim,
            ArchConfig::Setpinn(c) => c.in_dim,
        };
        if net_dim != problem.dim() {
            return Err(Error::config(format!(
                "network takes {net_dim} coordinates but {} has {}",
                problem.name(),
                problem.dim()
            )));
        }
        if self.sampling.cells.len() != problem.dim() {
            return Err(Error::config(
                "partition needs one cell count per coordinate",
            ));
        }
        if let ArchConfig::Setpinn(c) = &self.arch {
            if self.sampling.sampler != Sampler::Eas {
                return Err(Error::config(format!(
                    "setpinn needs element-aware sampling to form sets, got {}",
                    self.sampling.sampler
                )));
            }
            for (what, m) in [
                ("points_per_element", self.sampling.points_per_element),
                (
                    "face_points_per_element",
                    self.sampling.face_points_per_element,
                ),
            ] {
                if m % c.set_size != 0 {
                    return Err(Error::config(format!(
                        "{what} = {m} is not a multiple of set size {}",
                        c.set_size
                    )));
                }
            }
        }
        if self.adam.lr <= 0.0 || !self.adam.lr.is_finite() {
            return Err(Error::config("adam learning rate must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Adam,
    Lbfgs,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Adam => "adam",
            Stage::Lbfgs => "lbfgs",
        })
    }
}

/// One row of the metrics trace.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub step: usize,
    pub stage: Stage,
    pub total_loss: f64,
    pub grad_norm: f64,
    pub wall_ms: u64,
}

/// Writes `step,stage,total_loss,grad_norm,wall_ms`.
pub fn write_metrics_csv<W: Write>(rows: &[MetricRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["step", "stage", "total_loss", "grad_norm", "wall_ms"])?;
    for r in rows {
        w.write_record([
            r.step.to_string(),
            r.stage.to_string(),
            fmt_real(r.total_loss),
            fmt_real(r.grad_norm),
            r.wall_ms.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub struct TrainedModel {
    pub network: Network,
    pub theta: ParamVector<f64>,
    /// Element partition used for sampling and for grouping test points.
    pub partition: Partition<f64>,
    /// Collocation data of the L-BFGS stage.
    pub data: TrainingData<f64>,
    pub metrics: Vec<MetricRow>,
    /// Loss breakdown per logged step, aligned with `metrics`.
    pub breakdowns: Vec<LossBreakdown>,
    pub handoff_loss: f64,
    pub final_loss: LossBreakdown,
    /// `None` when the L-BFGS stage was disabled.
    pub termination: Option<Termination>,
    pub lbfgs_resets: usize,
}

impl TrainedModel {
    /// L-BFGS never increases the loss; anything else must be a flagged
    /// line-search failure.
    pub fn handoff_contract_holds(&self) -> bool {
        self.final_loss.total <= self.handoff_loss
            || self.termination == Some(Termination::LineSearchFailure)
    }
}

/// Adam warmup followed by L-BFGS on collocation points drawn once.
///
/// RAD is the one exception to fixed points: it starts from a uniform draw
/// and resamples the interior once, against the warmed-up residual, before
/// L-BFGS starts.
pub fn train(problem: &PdeProblem, config: &TrainConfig, seed: u64) -> Result<TrainedModel> {
    config.validate(problem)?;
    let network = Network::new(&config.arch)?;
    let method = config.method();
    let weighting = method.weighting();
    let partition = partition_uniform(&problem.domain::<f64>(), &config.sampling.cells)?;
    let mut theta: ParamVector<f64> = init_params(
        network.layout(),
        &mut rng_for(seed, stream_id(INIT_STREAM, 0)),
    );
    let mut data = sample_training_data(problem, &config.sampling, seed, None)?;

    let clock = Instant::now();
    let wall = || {
        if config.record_wall_time {
            clock.elapsed().as_millis() as u64
        } else {
            0
        }
    };
    let eval = |theta: &[f64], data: &TrainingData<f64>| {
        evaluate(&network, problem, theta, data, &config.lambdas, weighting)
    };

    let mut metrics = Vec::new();
    let mut breakdowns = Vec::new();
    let mut adam = AdamState::new(theta.len(), config.adam);
    let mut params = theta.as_slice().to_vec();
    for step in 0..config.adam_iters {
        let e = eval(&params, &data).map_err(|e| diverged(e, &params, "adam", step))?;
        let mut b = e.breakdown;
        b.step = step;
        metrics.push(MetricRow {
            step,
            stage: Stage::Adam,
            total_loss: b.total,
            grad_norm: norm(&e.gradient),
            wall_ms: wall(),
        });
        breakdowns.push(b);
        let before = params.clone();
        adam_step(&mut adam, &mut params, &e.gradient);
        if params.iter().any(|v| !v.is_finite()) {
            return Err(Error::Diverged {
                context: format!("adam step {step} produced non-finite parameters"),
                last_theta: before,
            });
        }
    }

    if config.sampling.sampler == Sampler::Rad {
        let field = |b: &PointBatch<f64>| {
            interior_squared_residuals(&network, problem, &params, b.coords())
                .unwrap_or_else(|_| vec![0.0; b.len()])
        };
        data = sample_training_data(problem, &config.sampling, seed, Some(&field))?;
    }

    let handoff =
        eval(&params, &data).map_err(|e| diverged(e, &params, "handoff", config.adam_iters))?;
    let handoff_loss = handoff.breakdown.total;

    let (termination, resets, final_loss) = if config.lbfgs.max_iters == 0 {
        (None, 0, handoff.breakdown)
    } else {
        // breakdowns of the current line search, matched to the accepted value
        let pending: RefCell<Vec<LossBreakdown>> = RefCell::new(Vec::new());
        let objective = |x: &[f64]| {
            let e = eval(x, &data)?;
            pending.borrow_mut().push(e.breakdown.clone());
            Ok((e.breakdown.total, e.gradient))
        };
        let offset = config.adam_iters;
        let result = lbfgs_minimize_with(objective, &params, &config.lbfgs, |rec| {
            let mut p = pending.borrow_mut();
            let mut b = p
                .iter()
                .rev()
                .find(|b| b.total.to_bits() == rec.value.to_bits())
                .cloned()
                .unwrap_or_default();
            p.clear();
            b.step = offset + rec.iteration - 1;
            metrics.push(MetricRow {
                step: b.step,
                stage: Stage::Lbfgs,
                total_loss: rec.value,
                grad_norm: rec.grad_norm,
                wall_ms: wall(),
            });
            breakdowns.push(b);
        })
        .map_err(|e| match e {
            Error::Diverged { context, .. } => Error::Diverged {
                context,
                last_theta: params.clone(),
            },
            other => other,
        })?;
        params = result.theta;
        let mut last = eval(&params, &data)?.breakdown;
        last.step = offset + result.trace.len();
        (Some(result.termination), result.resets, last)
    };
    theta = ParamVector::from_vec(network.layout(), params)?;

    Ok(TrainedModel {
        network,
        theta,
        partition,
        data,
        metrics,
        breakdowns,
        handoff_loss,
        final_loss,
        termination,
        lbfgs_resets: resets,
    })
}

fn diverged(e: Error, theta: &[f64], stage: &str, step: usize) -> Error {
    if e.is_numerical() {
        Error::Diverged {
            context: format!("{stage} step {step}: {e}"),
            last_theta: theta.to_vec(),
        }
    } else {
        e
    }
}
