//! Benchmark front end for `setpinn`: configuration files, test-grid
//! evaluation, ablation sweeps, the theory suite and the `setpinn` CLI.

pub mod ablate;
pub mod cli;
pub mod config;
pub mod error;
pub mod eval;
pub mod ini;
pub mod inspect;
pub mod run;
pub mod theory_suite;

pub use config::{Overrides, RunConfig};
pub use error::{exit, BenchError, Result};
