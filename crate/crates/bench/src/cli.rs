use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use setpinn::geometry::{write_points_csv, PointBatch};
use setpinn::losses::sample_training_data;
use setpinn::optim::Profile;

use crate::ablate::{default_values, medians, run_ablation, write_rows_csv};
use crate::config::{Overrides, RunConfig, TheoryRun};
use crate::error::{exit, BenchError, Result};
use crate::inspect::inspect;
use crate::run::{
    create_dir, evaluate_checkpoint, run_training, write_artifacts, write_eval, write_json,
    CHECKPOINT,
};
use crate::theory_suite::run_theory_suite;

pub const POINTS: &str = "points.csv";
pub const THEORY: &str = "theory.json";
pub const THEORY_DETAILS: &str = "theory_details.json";

#[derive(Debug, Parser)]
#[command(
    name = "setpinn",
    version,
    about = "Train, evaluate and verify physics-informed networks"
)]
pub struct Cli {
    /// Seed for every random stream; overrides `[run] seed`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Size preset: desk or full.
    #[arg(long, global = true, value_parser = parse_profile)]
    pub profile: Option<Profile>,
    /// Output directory; overrides `[run] output`.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

fn parse_profile(s: &str) -> std::result::Result<Profile, String> {
    s.parse().map_err(|e: setpinn::Error| e.to_string())
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a model and write checkpoint, metrics, evaluation and field dump.
    Train { config: PathBuf },
    /// Re-evaluate a saved checkpoint on the test grid.
    Eval {
        config: PathBuf,
        /// Defaults to checkpoint.bin in the output directory.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Run the Monte-Carlo theory suite; exits 4 if any check fails.
    VerifyTheory { config: Option<PathBuf> },
    /// Sweep one setting over several seeds.
    Ablate {
        config: PathBuf,
        /// element_size, heads, blocks or sampler; overrides `[ablate] sweep`.
        #[arg(long)]
        sweep: Option<crate::config::Sweep>,
    },
    /// Export the collocation points a run would train on.
    Sample { config: PathBuf },
    /// Parse artifacts written by the other commands and summarize them.
    Inspect {
        #[arg(required = true)]
        files: Vec<PathBuf>,
    },
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn main_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                exit::CONFIG
            } else {
                exit::OK
            };
        }
    };
    match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cli: &Cli) -> Result<i32> {
    let overrides = Overrides {
        seed: cli.seed,
        profile: cli.profile,
        output: cli.output.clone(),
    };
    match &cli.command {
        Command::Train { config } => {
            let cfg = RunConfig::load(config, &overrides)?;
            let run = run_training(&cfg)?;
            write_artifacts(&cfg.output, &run)?;
            println!(
                "{}: rrmse {:.6e}, final loss {:.6e}, artifacts in {}",
                cfg.name,
                run.result.rrmse,
                run.result.final_loss.total,
                cfg.output.display()
            );
            Ok(exit::OK)
        }
        Command::Eval { config, checkpoint } => {
            let cfg = RunConfig::load(config, &overrides)?;
            let ckpt = checkpoint
                .clone()
                .unwrap_or_else(|| cfg.output.join(CHECKPOINT));
            let (result, field) = evaluate_checkpoint(&cfg, &ckpt)?;
            create_dir(&cfg.output)?;
            write_eval(&cfg.output, &result, &field)?;
            println!("{}: rrmse {:.6e}", cfg.name, result.rrmse);
            Ok(exit::OK)
        }
        Command::VerifyTheory { config } => {
            let run = TheoryRun::load(config.as_deref(), &overrides)?;
            let suite = run_theory_suite(&run.theory, run.seed)?;
            create_dir(&run.output)?;
            write_json(&run.output.join(THEORY), &suite.reports)?;
            write_json(&run.output.join(THEORY_DETAILS), &suite.details)?;
            for r in &suite.reports {
                println!(
                    "{:<5} {}",
                    if r.pass { "PASS" } else { "FAIL" },
                    r.experiment
                );
            }
            for (name, ok) in &suite.checks {
                println!("{:<5} {name}", if *ok { "PASS" } else { "FAIL" });
            }
            Ok(if suite.all_pass() {
                exit::OK
            } else {
                exit::ACCEPTANCE
            })
        }
        Command::Ablate { config, sweep } => {
            let cfg = RunConfig::load(config, &overrides)?;
            let sweep = sweep.or(cfg.ablate.sweep).ok_or_else(|| {
                BenchError::config("no sweep: pass --sweep or set [ablate] sweep")
            })?;
            let values = cfg
                .ablate
                .values
                .clone()
                .unwrap_or_else(|| default_values(sweep));
            let rows = run_ablation(&cfg, sweep, &values, &cfg.ablate.seeds)?;
            create_dir(&cfg.output)?;
            let path = cfg.output.join(format!("ablation_{sweep}.csv"));
            let file = std::fs::File::create(&path)
                .map_err(|e| BenchError::io(format!("creating {}", path.display()), e))?;
            write_rows_csv(&rows, file)?;
            for (v, m) in medians(&rows) {
                println!("{sweep} = {v}: median rrmse {m:.6e}");
            }
            Ok(exit::OK)
        }
        Command::Sample { config } => {
            let cfg = RunConfig::load(config, &overrides)?;
            let data =
                sample_training_data::<f64>(&cfg.problem, &cfg.train.sampling, cfg.seed, None)?;
            let mut all = PointBatch::new(cfg.problem.dim());
            for b in &data.batches {
                all.extend(&b.points);
            }
            create_dir(&cfg.output)?;
            let path = cfg.output.join(POINTS);
            write_points(&path, &all)?;
            println!("{} points written to {}", all.len(), path.display());
            Ok(exit::OK)
        }
        Command::Inspect { files } => {
            for f in files {
                println!("{}: {}", f.display(), inspect(f)?.summary());
            }
            Ok(exit::OK)
        }
    }
}

fn write_points(path: &Path, batch: &PointBatch<f64>) -> Result<()> {
    let file = std::fs::File::create(path)
        .map_err(|e| BenchError::io(format!("creating {}", path.display()), e))?;
    Ok(write_points_csv(batch, std::io::BufWriter::new(file))?)
}
