//! Run configuration: an INI file resolved against a profile preset.
//!
//! Every run starts from `TrainConfig::preset(problem, method, sampler,
//! profile)`; keys present in the file override single fields of it.

use std::path::{Path, PathBuf};

use serde::Serialize;
use setpinn::losses::Sampler;
use setpinn::models::ArchConfig;
use setpinn::optim::{Method, Profile, TrainConfig};
use setpinn::pde::{helmholtz3d_with, plate_with_modes, PdeProblem, PLATE_MODES};

use crate::error::{BenchError, Result};
use crate::ini::{Fields, Ini};

/// Environment variable naming the directory relative outputs resolve against.
pub const OUTPUT_ROOT_ENV: &str = "SETPINN_OUTPUT_ROOT";

const SECTIONS: [&str; 11] = [
    "run",
    "problem",
    "partition",
    "rad",
    "model",
    "optimizer",
    "loss",
    "eval",
    "output",
    "theory",
    "ablate",
];

/// Command-line values that take precedence over the file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub profile: Option<Profile>,
    pub output: Option<PathBuf>,
}

/// Monte-Carlo budgets for the theory suite.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TheoryConfig {
    /// Trials for the unbiasedness experiments.
    pub unbiased_trials: usize,
    pub variance_trials: usize,
    pub gradient_trials: usize,
    pub coverage_trials: usize,
    pub random_fields: usize,
    /// Adam and L-BFGS steps for the partially trained convection net.
    pub warm_adam: usize,
    pub warm_lbfgs: usize,
}

impl Default for TheoryConfig {
    fn default() -> Self {
        Self {
            unbiased_trials: 10_000,
            variance_trials: 2000,
            gradient_trials: 2000,
            coverage_trials: 1000,
            random_fields: 100,
            warm_adam: 100,
            warm_lbfgs: 50,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Sweep {
    ElementSize,
    Heads,
    Blocks,
    Sampler,
}

impl std::str::FromStr for Sweep {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "element_size" => Ok(Sweep::ElementSize),
            "heads" => Ok(Sweep::Heads),
            "blocks" => Ok(Sweep::Blocks),
            "sampler" => Ok(Sweep::Sampler),
            _ => Err(format!(
                "unknown sweep {s:?}; expected element_size, heads, blocks or sampler"
            )),
        }
    }
}

impl std::fmt::Display for Sweep {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Sweep::ElementSize => "element_size",
            Sweep::Heads => "heads",
            Sweep::Blocks => "blocks",
            Sweep::Sampler => "sampler",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AblateConfig {
    pub sweep: Option<Sweep>,
    /// Raw setting labels; parsed per sweep when the sweep runs.
    pub values: Option<Vec<String>>,
    pub seeds: Vec<u64>,
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub name: String,
    pub problem: PdeProblem,
    pub profile: Profile,
    pub seed: u64,
    pub output: PathBuf,
    pub train: TrainConfig,
    /// Test-grid points per axis, boundaries included.
    pub eval_resolution: usize,
    pub theory: TheoryConfig,
    pub ablate: AblateConfig,
}

impl RunConfig {
    pub fn method(&self) -> Method {
        self.train.method()
    }

    pub fn sampler(&self) -> Sampler {
        self.train.sampling.sampler
    }

    pub fn load(path: &Path, overrides: &Overrides) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| BenchError::io(format!("reading config {}", path.display()), e))?;
        Self::parse(&path.display().to_string(), &text, overrides)
    }

    pub fn parse(file: &str, text: &str, overrides: &Overrides) -> Result<Self> {
        let ini = Ini::parse(file, text)?;
        ini.check_sections(&SECTIONS)?;
        let missing = |key: &str| {
            let line = ini.section("run").map_or(1, |s| s.line);
            BenchError::at(file, line, format!("[run] needs a {key} key"))
        };

        let mut run = ini.fields("run");
        let problem_entry = run.take("problem").ok_or_else(|| missing("problem"))?;
        let method: Method = run.get("method")?.ok_or_else(|| missing("method"))?;
        let sampler: Sampler = run.get("sampler")?.unwrap_or(match method {
            Method::Setpinn => Sampler::Eas,
            _ => Sampler::Gus,
        });
        let file_profile: Option<Profile> = run.get("profile")?;
        let file_seed: Option<u64> = run.get("seed")?;
        let name: Option<String> = run.get("name")?;
        let output: Option<PathBuf> = run.get("output")?;
        let problem = build_problem(&ini, &run, problem_entry)?;
        run.finish()?;

        let profile = overrides.profile.or(file_profile).unwrap_or(Profile::Desk);
        let seed = overrides.seed.or(file_seed).ok_or_else(|| {
            BenchError::at(
                file,
                ini.section("run").map_or(1, |s| s.line),
                "no seed: set [run] seed or pass --seed (there is no clock-based default)",
            )
        })?;

        let mut train = TrainConfig::preset(&problem, method, sampler, profile);
        apply_partition(&ini, &mut train, problem.dim())?;
        apply_model(&ini, &mut train)?;
        apply_optimizer(&ini, &mut train)?;
        apply_loss(&ini, &mut train)?;
        let mut out = ini.fields("output");
        train.record_wall_time = out.get("record_wall_time")?.unwrap_or(false);
        out.finish()?;
        train.validate(&problem).map_err(|e| {
            let line = ini.section("run").map_or(1, |s| s.line);
            BenchError::at(file, line, e.to_string())
        })?;

        let mut ev = ini.fields("eval");
        let default_res = match (problem.dim(), profile) {
            (3, Profile::Desk) => 51,
            _ => 101,
        };
        let eval_resolution = ev.get("resolution")?.unwrap_or(default_res);
        if eval_resolution < 2 {
            let e = ini.section("eval").map_or(1, |s| s.line);
            return Err(BenchError::at(file, e, "[eval] resolution must be >= 2"));
        }
        ev.finish()?;

        let theory = parse_theory(&ini)?;
        let mut ab = ini.fields("ablate");
        let sweep = ab.get("sweep")?;
        let values = ab.list("values")?;
        let seeds = ab
            .list("seeds")?
            .unwrap_or_else(|| (seed..seed + 5).collect());
        ab.finish()?;

        let name =
            name.unwrap_or_else(|| format!("{}-{}-{}-s{}", problem.name(), method, sampler, seed));
        let output = resolve_output(
            overrides
                .output
                .clone()
                .or(output)
                .unwrap_or_else(|| PathBuf::from(&name)),
        );
        Ok(Self {
            name,
            problem,
            profile,
            seed,
            output,
            train,
            eval_resolution,
            theory,
            ablate: AblateConfig {
                sweep,
                values,
                seeds,
            },
        })
    }
}

/// Relative paths resolve against `$SETPINN_OUTPUT_ROOT` when it is set.
pub fn resolve_output(path: PathBuf) -> PathBuf {
    if path.is_absolute() {
        return path;
    }
    match std::env::var_os(OUTPUT_ROOT_ENV) {
        Some(root) if !root.is_empty() => PathBuf::from(root).join(path),
        _ => path,
    }
}

fn build_problem(ini: &Ini, run: &Fields<'_>, entry: &crate::ini::Entry) -> Result<PdeProblem> {
    let mut p = ini.fields("problem");
    let problem = match entry.value.as_str() {
        "plate" => plate_with_modes(p.get("modes")?.unwrap_or(PLATE_MODES)),
        "helmholtz3d" => {
            let a = p.get("amplitude")?.unwrap_or(1.0);
            let k: Vec<f64> = p.list("wavenumbers")?.unwrap_or_else(|| vec![1.0; 3]);
            let scale = p.get("kappa_scale")?.unwrap_or(0.9);
            let k: [f64; 3] = k.try_into().map_err(|_| {
                BenchError::at(
                    ini.file(),
                    ini.section("problem").map_or(1, |s| s.line),
                    "wavenumbers needs 3 values",
                )
            })?;
            helmholtz3d_with(a, k, scale)
        }
        other => PdeProblem::by_name(other).map_err(|e| run.error(entry, e.to_string()))?,
    };
    p.finish()?;
    Ok(problem)
}

fn section_line(ini: &Ini, name: &str) -> usize {
    ini.section(name).map_or(1, |s| s.line)
}

fn apply_partition(ini: &Ini, train: &mut TrainConfig, dim: usize) -> Result<()> {
    let mut f = ini.fields("partition");
    if let Some(e) = f.take("cells") {
        let cells = e
            .value
            .split(',')
            .map(|v| v.trim().parse::<usize>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|err| f.error(e, err.to_string()))?;
        train.sampling.cells = match cells.len() {
            1 => vec![cells[0]; dim],
            n if n == dim => cells,
            n => {
                return Err(f.error(
                    e,
                    format!("{n} counts given, problem has {dim} coordinates"),
                ))
            }
        };
        if train.sampling.cells.contains(&0) {
            return Err(f.error(e, "cell counts must be >= 1"));
        }
    }
    if let Some(v) = f.get("points_per_element")? {
        train.sampling.points_per_element = v;
    }
    if let Some(v) = f.get("face_points_per_element")? {
        train.sampling.face_points_per_element = v;
    }
    f.finish()?;
    let mut r = ini.fields("rad");
    if let Some(v) = r.get("pool_factor")? {
        train.sampling.rad.pool_factor = v;
    }
    if let Some(v) = r.get("exponent")? {
        train.sampling.rad.exponent = v;
    }
    if let Some(v) = r.get("floor")? {
        train.sampling.rad.floor = v;
    }
    r.finish()
}

const SET_KEYS: [&str; 7] = [
    "set_size",
    "embed",
    "heads",
    "blocks",
    "mixer_hidden",
    "ffn_hidden",
    "probe_hidden",
];

fn apply_model(ini: &Ini, train: &mut TrainConfig) -> Result<()> {
    let mut f = ini.fields("model");
    match &mut train.arch {
        ArchConfig::Pinn(c) | ArchConfig::Fls(c) | ArchConfig::Qres(c) => {
            for key in SET_KEYS {
                if let Some(e) = f.take(key) {
                    return Err(f.error(e, "only applies to method = setpinn"));
                }
            }
            if let Some(h) = f.list("hidden")? {
                c.hidden = h;
            }
        }
        ArchConfig::Setpinn(c) => {
            if let Some(e) = f.take("hidden") {
                return Err(f.error(
                    e,
                    "set networks take mixer_hidden, ffn_hidden and probe_hidden",
                ));
            }
            if let Some(v) = f.get("set_size")? {
                c.set_size = v;
            }
            if let Some(v) = f.get("embed")? {
                c.embed = v;
            }
            if let Some(v) = f.get("heads")? {
                c.heads = v;
            }
            if let Some(v) = f.get("blocks")? {
                c.blocks = v;
            }
            if let Some(v) = f.list("mixer_hidden")? {
                c.mixer_hidden = v;
            }
            if let Some(v) = f.list("ffn_hidden")? {
                c.ffn_hidden = v;
            }
            if let Some(v) = f.list("probe_hidden")? {
                c.probe_hidden = v;
            }
        }
    }
    f.finish()?;
    let check = match &train.arch {
        ArchConfig::Setpinn(c) => c.validate(),
        ArchConfig::Pinn(c) | ArchConfig::Fls(c) | ArchConfig::Qres(c) => c.validate(),
    };
    check.map_err(|e| BenchError::at(ini.file(), section_line(ini, "model"), e.to_string()))
}

fn apply_optimizer(ini: &Ini, train: &mut TrainConfig) -> Result<()> {
    let mut f = ini.fields("optimizer");
    if let Some(v) = f.get("adam_iters")? {
        train.adam_iters = v;
    }
    if let Some(v) = f.get("adam_lr")? {
        train.adam.lr = v;
    }
    if let Some(v) = f.get("adam_beta1")? {
        train.adam.beta1 = v;
    }
    if let Some(v) = f.get("adam_beta2")? {
        train.adam.beta2 = v;
    }
    if let Some(v) = f.get("adam_eps")? {
        train.adam.eps = v;
    }
    if let Some(v) = f.get("lbfgs_iters")? {
        train.lbfgs.max_iters = v;
    }
    if let Some(v) = f.get("lbfgs_memory")? {
        train.lbfgs.memory = v;
    }
    if let Some(v) = f.get("lbfgs_tol")? {
        train.lbfgs.tol = v;
    }
    if let Some(v) = f.get("line_search_evals")? {
        train.lbfgs.max_line_search = v;
    }
    if let Some(v) = f.get("wolfe_c1")? {
        train.lbfgs.c1 = v;
    }
    if let Some(v) = f.get("wolfe_c2")? {
        train.lbfgs.c2 = v;
    }
    f.finish()?;
    let l = &train.lbfgs;
    if l.memory == 0 || !(0.0 < l.c1 && l.c1 < l.c2 && l.c2 < 1.0) {
        return Err(BenchError::at(
            ini.file(),
            section_line(ini, "optimizer"),
            "need lbfgs_memory >= 1 and 0 < wolfe_c1 < wolfe_c2 < 1",
        ));
    }
    Ok(())
}

fn apply_loss(ini: &Ini, train: &mut TrainConfig) -> Result<()> {
    let mut f = ini.fields("loss");
    let l = &mut train.lambdas;
    for (key, slot) in [
        ("interior", &mut l.interior),
        ("initial", &mut l.initial),
        ("initial_dt", &mut l.initial_dt),
        ("boundary", &mut l.boundary),
    ] {
        if let Some(e) = f.take(key) {
            let v: f64 = e
                .value
                .parse()
                .map_err(|err: std::num::ParseFloatError| f.error(e, err.to_string()))?;
            if !(v >= 0.0 && v.is_finite()) {
                return Err(f.error(e, "weights must be finite and non-negative"));
            }
            *slot = v;
        }
    }
    f.finish()
}

fn parse_theory(ini: &Ini) -> Result<TheoryConfig> {
    let mut f = ini.fields("theory");
    let d = TheoryConfig::default();
    let t = TheoryConfig {
        unbiased_trials: f.get("unbiased_trials")?.unwrap_or(d.unbiased_trials),
        variance_trials: f.get("variance_trials")?.unwrap_or(d.variance_trials),
        gradient_trials: f.get("gradient_trials")?.unwrap_or(d.gradient_trials),
        coverage_trials: f.get("coverage_trials")?.unwrap_or(d.coverage_trials),
        random_fields: f.get("random_fields")?.unwrap_or(d.random_fields),
        warm_adam: f.get("warm_adam")?.unwrap_or(d.warm_adam),
        warm_lbfgs: f.get("warm_lbfgs")?.unwrap_or(d.warm_lbfgs),
    };
    f.finish()?;
    let counts = [
        t.unbiased_trials,
        t.variance_trials,
        t.gradient_trials,
        t.coverage_trials,
    ];
    if counts.iter().any(|&n| n < 2) {
        return Err(BenchError::at(
            ini.file(),
            section_line(ini, "theory"),
            "trial counts must be >= 2",
        ));
    }
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<RunConfig> {
        RunConfig::parse("c.ini", text, &Overrides::default())
    }

    #[test]
    fn preset_plus_overrides() {
        let c = parse(
            "[run]\nproblem = convection\nmethod = pinn\nseed = 4\n[model]\nhidden = 16,16\n[optimizer]\nlbfgs_iters = 7\n",
        )
        .unwrap();
        assert_eq!(c.seed, 4);
        assert_eq!(c.sampler(), Sampler::Gus);
        assert_eq!(c.profile, Profile::Desk);
        assert_eq!(c.train.lbfgs.max_iters, 7);
        assert_eq!(c.train.sampling.cells, vec![8, 8]);
        assert_eq!(c.eval_resolution, 101);
        match &c.train.arch {
            ArchConfig::Pinn(m) => assert_eq!(m.hidden, vec![16, 16]),
            a => panic!("{a:?}"),
        }
        assert_eq!(c.name, "convection-pinn-gus-s4");
    }

    #[test]
    fn cli_overrides_win() {
        let o = Overrides {
            seed: Some(9),
            profile: Some(Profile::Full),
            output: None,
        };
        let c = RunConfig::parse(
            "c.ini",
            "[run]\nproblem = helmholtz3d\nmethod = setpinn\n",
            &o,
        )
        .unwrap();
        assert_eq!(
            (c.seed, c.profile, c.eval_resolution),
            (9, Profile::Full, 101)
        );
        assert_eq!(c.sampler(), Sampler::Eas);
        let c = RunConfig::parse(
            "c.ini",
            "[run]\nproblem = helmholtz3d\nmethod = pinn\nseed=1\n",
            &Overrides::default(),
        )
        .unwrap();
        assert_eq!(c.eval_resolution, 51);
    }

    #[test]
    fn bad_configs_point_at_lines() {
        let cases = [
            ("[run]\nproblem = nowhere\nmethod = pinn\nseed = 1\n", "c.ini:2"),
            ("[run]\nproblem = convection\nmethod = pinn\n", "c.ini:1"),
            ("[run]\nproblem = convection\nmethod = pinn\nseed = 1\n[model]\nheads = 4\n", "c.ini:6"),
            ("[run]\nproblem = convection\nmethod = setpinn\nseed = 1\nsampler = gus\n", "c.ini:1"),
            ("[run]\nproblem = convection\nmethod = pinn\nseed = 1\n[partition]\ncells = 2,2,2\n", "c.ini:6"),
            ("[run]\nproblem = convection\nmethod = pinn\nseed = 1\n[loss]\ninterior = -1\n", "c.ini:6"),
            ("[run]\nproblem = convection\nmethod = pinn\nseed = 1\n[extra]\n", "c.ini:5"),
            ("[run]\nproblem = convection\nmethod = magic\nseed = 1\n", "c.ini:3"),
            ("\n[run]\nmethod = pinn\nseed = 1\n", "c.ini:2"),
        ];
        for (text, want) in cases {
            let e = parse(text).unwrap_err();
            assert_eq!(e.exit_code(), crate::error::exit::CONFIG);
            assert!(e.to_string().starts_with(want), "{text:?} -> {e}");
        }
    }

    #[test]
    fn ablate_and_theory_sections() {
        let c = parse(
            "[run]\nproblem = reaction1d\nmethod = setpinn\nseed = 2\n[ablate]\nsweep = heads\nvalues = 2,4\n[theory]\ncoverage_trials = 50\n",
        )
        .unwrap();
        assert_eq!(c.ablate.sweep, Some(Sweep::Heads));
        assert_eq!(
            c.ablate.values,
            Some(vec!["2".to_string(), "4".to_string()])
        );
        assert_eq!(c.ablate.seeds, vec![2, 3, 4, 5, 6]);
        assert_eq!(c.theory.coverage_trials, 50);
    }
}

/// Settings for `verify-theory`: a seed, an output directory and the
/// `[theory]` budgets.
#[derive(Clone, Debug)]
pub struct TheoryRun {
    pub seed: u64,
    pub output: PathBuf,
    pub theory: TheoryConfig,
}

impl TheoryRun {
    pub const DEFAULT_OUTPUT: &'static str = "theory";

    pub fn load(path: Option<&Path>, overrides: &Overrides) -> Result<Self> {
        let (label, text) = match path {
            Some(p) => (
                p.display().to_string(),
                std::fs::read_to_string(p)
                    .map_err(|e| BenchError::io(format!("reading config {}", p.display()), e))?,
            ),
            None => ("<command line>".to_string(), String::new()),
        };
        Self::parse(&label, &text, overrides)
    }

    pub fn parse(file: &str, text: &str, overrides: &Overrides) -> Result<Self> {
        let ini = Ini::parse(file, text)?;
        ini.check_sections(&["run", "theory"])?;
        let mut run = ini.fields("run");
        let seed: Option<u64> = run.get("seed")?;
        let output: Option<PathBuf> = run.get("output")?;
        run.finish()?;
        let seed = overrides.seed.or(seed).ok_or_else(|| {
            BenchError::at(
                file,
                section_line(&ini, "run"),
                "no seed: set [run] seed or pass --seed",
            )
        })?;
        let output = overrides
            .output
            .clone()
            .or(output)
            .unwrap_or_else(|| PathBuf::from(Self::DEFAULT_OUTPUT));
        Ok(Self {
            seed,
            output: resolve_output(output),
            theory: parse_theory(&ini)?,
        })
    }
}
