//! Two-stage training: Adam warmup, then L-BFGS with a strong Wolfe line
//! search, both on full-batch gradients over fixed collocation points.

mod adam;
mod lbfgs;
mod train;


pub use adam::{adam_step, AdamConfig, AdamState};
pub use lbfgs::{
    lbfgs_minimize, lbfgs_minimize_with, LbfgsConfig, LbfgsRecord, LbfgsResult, LbfgsState,
    Termination,
};
pub use train::{
    preset_arch, train, write_metrics_csv, Method, MetricRow, Profile, Stage, TrainConfig,
    TrainedModel,
};
