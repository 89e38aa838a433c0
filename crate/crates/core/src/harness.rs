//! Multi-seed experiments: configuration, CSV histories, aggregates, plots
//! and the smoothing-radius sweep.
//!
//! Output layout for an experiment on task `T` with algorithm `A`:
//!
//! ```text
//! <out>/T_A_seed<k>.csv     one per seed
//! <out>/T_A_aggregate.csv   per-iteration mean/min/max across seeds
//! <out>/T_A.png             mean curve with min–max band
//! <out>/error.log           only when a run fails
//! ```
//!
//! A sweep writes the same files per radius with `_r<value>` appended to the
//! stem, plus `T_A_sweep.png` overlaying the mean curves and
//! `T_A_sweep.csv` with the final return of every run.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env::{EnvKind, RolloutObjective, Synthetic, SyntheticKind};
use crate::error::{invalid, Error, Result};
use crate::optimizer::{train, Algorithm, IterationRecord, TrainerConfig, TrainingHistory};
use crate::parallel::{Evaluator, LocalPool};
use crate::plot::{self, Series, PALETTE};
use crate::policy::DEFAULT_HIDDEN;
use crate::seed::{self, stream};
use crate::smoothing::Objective;
use crate::wire::point_checksum;

pub const CONFIG_VERSION: u32 = 1;

/// Header of every per-seed history file.
pub const HISTORY_HEADER: [&str; 8] =
    ["iteration", "mean_return", "min_return", "max_return", "grad_norm", "evals", "perturbed", "wall_ms"];

pub const AGGREGATE_HEADER: [&str; 5] = ["iteration", "mean_return", "min_return", "max_return", "seeds"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Task {
    Env(EnvKind),
    Synthetic(SyntheticKind),
}

impl Task {
    pub fn all() -> Vec<Task> {
        EnvKind::ALL.into_iter().map(Task::Env).chain(SyntheticKind::ALL.into_iter().map(Task::Synthetic)).collect()
    }

    pub fn name(self) -> &'static str {
        match self {
            Task::Env(k) => k.name(),
            Task::Synthetic(k) => k.name(),
        }
    }

    pub fn valid_names() -> String {
        Task::all().iter().map(|t| t.name()).collect::<Vec<_>>().join(", ")
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if let Ok(k) = s.parse::<EnvKind>() {
            return Ok(Task::Env(k));
        }
        if let Ok(k) = s.parse::<SyntheticKind>() {
            return Ok(Task::Synthetic(k));
        }
        Err(invalid(format!("unknown task '{s}'; valid tasks: {}", Task::valid_names())))
    }
}

impl TryFrom<String> for Task {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Task> for String {
    fn from(t: Task) -> String {
        t.name().to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub version: u32,
    pub task: Task,
    pub algorithm: Algorithm,
    pub trainer: TrainerConfig,
    /// Hidden width of the policy network (control tasks).
    pub hidden: usize,
    /// Dimension of synthetic objectives (`multimodal-2d` requires 2).
    pub dim: usize,
    /// Half-width of the uniform box `θ0` is drawn from (synthetic tasks).
    pub init_scale: Option<f64>,
    /// One training run per seed; each seed is also the run's master seed.
    pub seeds: Vec<u64>,
    /// When set, every run starts from the `θ0` drawn for this seed.
    pub shared_init_seed: Option<u64>,
    pub out: PathBuf,
    /// Radius values for a sweep; empty for a plain experiment.
    pub sweep: Vec<f64>,
    pub concurrent_seeds: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            version: CONFIG_VERSION,
            task: Task::Env(EnvKind::CartPole),
            algorithm: Algorithm::DgsEs,
            trainer: TrainerConfig::default(),
            hidden: DEFAULT_HIDDEN,
            dim: 10,
            init_scale: None,
            seeds: vec![0, 1, 2, 3, 4],
            shared_init_seed: None,
            out: PathBuf::from("results"),
            sweep: Vec::new(),
            concurrent_seeds: false,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        if config.version != CONFIG_VERSION {
            return Err(Error::Config(format!(
                "config version {} is not supported (expected {CONFIG_VERSION})",
                config.version
            )));
        }
        Ok(config)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.trainer.validate()?;
        if self.seeds.is_empty() {
            return Err(invalid("at least one seed is required"));
        }
        let mut sorted = self.seeds.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(invalid("seeds must be distinct"));
        }
        if self.hidden == 0 {
            return Err(invalid("hidden width must be at least 1"));
        }
        if let Task::Synthetic(kind) = self.task {
            Synthetic::new(kind, self.dim)?;
        }
        if let Some(s) = self.init_scale {
            if !(s >= 0.0 && s.is_finite()) {
                return Err(invalid(format!("init scale must be finite and >= 0, got {s}")));
            }
        }
        for &r in &self.sweep {
            if !(r > 0.0 && r.is_finite()) {
                return Err(invalid(format!("sweep radii must be finite and > 0, got {r}")));
            }
        }
        Ok(())
    }

    fn stem(&self) -> String {
        format!("{}_{}", self.task, self.algorithm)
    }
}

/// Default half-width of the `θ0` box for synthetic objectives.
pub fn default_init_scale(kind: SyntheticKind) -> f64 {
    match kind {
        SyntheticKind::Sphere | SyntheticKind::ShiftedQuadratic => 1.0,
        SyntheticKind::Multimodal2d => 3.0,
    }
}

/// The objective for `config.task`.
pub fn build_objective(config: &ExperimentConfig) -> Result<Box<dyn Objective>> {
    Ok(match config.task {
        Task::Env(kind) => {
            let spec = kind.spec();
            let policy = spec.policy(config.hidden)?;
            Box::new(RolloutObjective::new(spec, policy)?)
        }
        Task::Synthetic(kind) => Box::new(Synthetic::new(kind, config.dim)?),
    })
}

/// Starting parameters drawn for `seed`: the policy's initialisation for
/// control tasks, a uniform draw from `[-s, s]^d` for synthetic ones.
pub fn initial_params(config: &ExperimentConfig, seed: u64) -> Result<Vec<f64>> {
    match config.task {
        Task::Env(kind) => Ok(kind.spec().policy(config.hidden)?.init_params(seed).into_inner()),
        Task::Synthetic(kind) => {
            let scale = config.init_scale.unwrap_or_else(|| default_init_scale(kind));
            let dim = Synthetic::new(kind, config.dim)?.dim();
            let mut rng = seed::rng(seed::derive(seed, &[stream::INIT]));
            Ok((0..dim).map(|_| if scale == 0.0 { 0.0 } else { rng.random_range(-scale..=scale) }).collect())
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeedRun {
    pub seed: u64,
    pub theta0_checksum: u64,
    pub theta: Vec<f64>,
    pub history: TrainingHistory,
    pub csv_path: PathBuf,
    pub error: Option<String>,
}

impl SeedRun {
    pub fn final_return(&self) -> Option<f64> {
        self.history.records.last().map(|r| r.mean_return)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub iteration: usize,
    pub mean_return: f64,
    pub min_return: f64,
    pub max_return: f64,
    pub seeds: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSummary {
    pub runs: Vec<SeedRun>,
    pub aggregate: Vec<AggregateRow>,
    pub aggregate_path: PathBuf,
    pub plot_path: PathBuf,
}

impl ExperimentSummary {
    pub fn failed(&self) -> bool {
        self.runs.iter().any(|r| r.error.is_some())
    }
}

/// Creates one evaluator per training run.
pub type EvaluatorFactory<'a> = dyn Fn() -> Result<Box<dyn Evaluator>> + Sync + 'a;

pub fn local_evaluators(workers: usize) -> impl Fn() -> Result<Box<dyn Evaluator>> + Sync {
    move || Ok(Box::new(LocalPool::new(workers)?) as Box<dyn Evaluator>)
}

pub fn write_history_csv(path: &Path, records: &[IterationRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(HISTORY_HEADER)?;
    for r in records {
        w.write_record([
            r.iteration.to_string(),
            r.mean_return.to_string(),
            r.min_return.to_string(),
            r.max_return.to_string(),
            r.grad_norm.to_string(),
            r.evals.to_string(),
            u8::from(r.perturbed).to_string(),
            r.wall_ms.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn parse_field<T: FromStr>(rec: &csv::StringRecord, k: usize, path: &Path) -> Result<T> {
    rec.get(k)
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::Io(format!("{}: bad field {k} in {rec:?}", path.display())))
}

pub fn read_history_csv(path: &Path) -> Result<Vec<IterationRecord>> {
    let mut r = csv::Reader::from_path(path)?;
    if r.headers()?.iter().ne(HISTORY_HEADER) {
        return Err(Error::Io(format!("{}: unexpected header", path.display())));
    }
    r.records()
        .map(|rec| {
            let rec = rec?;
            Ok(IterationRecord {
                iteration: parse_field(&rec, 0, path)?,
                mean_return: parse_field(&rec, 1, path)?,
                min_return: parse_field(&rec, 2, path)?,
                max_return: parse_field(&rec, 3, path)?,
                grad_norm: parse_field(&rec, 4, path)?,
                evals: parse_field(&rec, 5, path)?,
                perturbed: parse_field::<u8>(&rec, 6, path)? != 0,
                wall_ms: parse_field(&rec, 7, path)?,
            })
        })
        .collect()
}

/// Per-iteration mean, min and max of the seeds' mean returns. Iterations
/// beyond a failed run's history use the remaining seeds.
pub fn aggregate(histories: &[&TrainingHistory]) -> Vec<AggregateRow> {
    let len = histories.iter().map(|h| h.len()).max().unwrap_or(0);
    (0..len)
        .map(|k| {
            let vals: Vec<f64> = histories.iter().filter_map(|h| h.records.get(k)).map(|r| r.mean_return).collect();
            AggregateRow {
                iteration: k,
                mean_return: vals.iter().sum::<f64>() / vals.len() as f64,
                min_return: vals.iter().copied().fold(f64::INFINITY, f64::min),
                max_return: vals.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                seeds: vals.len(),
            }
        })
        .collect()
}

pub fn write_aggregate_csv(path: &Path, rows: &[AggregateRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(AGGREGATE_HEADER)?;
    for r in rows {
        w.write_record([
            r.iteration.to_string(),
            r.mean_return.to_string(),
            r.min_return.to_string(),
            r.max_return.to_string(),
            r.seeds.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn band_series(rows: &[AggregateRow], color: [u8; 3]) -> Series {
    Series {
        mean: rows.iter().map(|r| r.mean_return).collect(),
        band: Some((rows.iter().map(|r| r.min_return).collect(), rows.iter().map(|r| r.max_return).collect())),
        color,
    }
}

fn run_seed(
    config: &ExperimentConfig,
    objective: &dyn Objective,
    make_evaluator: &EvaluatorFactory<'_>,
    seed: u64,
    stem: &str,
) -> Result<SeedRun> {
    let theta0 = initial_params(config, config.shared_init_seed.unwrap_or(seed))?;
    let trainer = TrainerConfig { master_seed: seed, ..config.trainer.clone() };
    let evaluator = make_evaluator()?;
    let csv_path = config.out.join(format!("{stem}_seed{seed}.csv"));
    let checksum = point_checksum(&theta0);
    let run = match train(config.algorithm, objective, &theta0, &trainer, evaluator.as_ref()) {
        Ok((theta, history)) => SeedRun { seed, theta0_checksum: checksum, theta, history, csv_path, error: None },
        Err(f) => SeedRun {
            seed,
            theta0_checksum: checksum,
            error: Some(f.to_string()),
            theta: f.theta,
            history: f.history,
            csv_path,
        },
    };
    write_history_csv(&run.csv_path, &run.history.records)?;
    Ok(run)
}

fn run_seeds(
    config: &ExperimentConfig,
    objective: &dyn Objective,
    make_evaluator: &EvaluatorFactory<'_>,
    stem: &str,
) -> Result<Vec<SeedRun>> {
    if config.concurrent_seeds && config.seeds.len() > 1 {
        std::thread::scope(|scope| {
            let handles: Vec<_> = config
                .seeds
                .iter()
                .map(|&s| scope.spawn(move || run_seed(config, objective, make_evaluator, s, stem)))
                .collect();
            handles.into_iter().map(|h| h.join().map_err(|_| Error::Io("seed run panicked".into()))?).collect()
        })
    } else {
        config.seeds.iter().map(|&s| run_seed(config, objective, make_evaluator, s, stem)).collect()
    }
}

fn write_error_log(out: &Path, runs: &[SeedRun]) -> Result<()> {
    let lines: Vec<String> =
        runs.iter().filter_map(|r| r.error.as_ref().map(|e| format!("seed {}: {e}", r.seed))).collect();
    if !lines.is_empty() {
        fs::write(out.join("error.log"), lines.join("\n") + "\n")?;
    }
    Ok(())
}

fn experiment_files(
    config: &ExperimentConfig,
    objective: &dyn Objective,
    make_evaluator: &EvaluatorFactory<'_>,
    stem: &str,
    color: [u8; 3],
) -> Result<ExperimentSummary> {
    let runs = run_seeds(config, objective, make_evaluator, stem)?;
    let histories: Vec<&TrainingHistory> = runs.iter().map(|r| &r.history).collect();
    let rows = aggregate(&histories);
    let aggregate_path = config.out.join(format!("{stem}_aggregate.csv"));
    write_aggregate_csv(&aggregate_path, &rows)?;
    let plot_path = config.out.join(format!("{stem}.png"));
    plot::save(&[band_series(&rows, color)], &plot_path)?;
    Ok(ExperimentSummary { runs, aggregate: rows, aggregate_path, plot_path })
}

/// Runs every seed of `config` and writes the CSVs and plot.
///
/// Invalid configurations fail before anything is written. A run that
/// fails mid-way still gets its partial CSV; the failure is recorded in the
/// summary and in `error.log`.
pub fn run_experiment(config: &ExperimentConfig, make_evaluator: &EvaluatorFactory<'_>) -> Result<ExperimentSummary> {
    config.validate()?;
    let objective = build_objective(config)?;
    fs::create_dir_all(&config.out)?;
    let summary = experiment_files(config, objective.as_ref(), make_evaluator, &config.stem(), PALETTE[0])?;
    write_error_log(&config.out, &summary.runs)?;
    Ok(summary)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSummary {
    pub radii: Vec<f64>,
    /// One experiment per radius, in the order given.
    pub experiments: Vec<ExperimentSummary>,
    pub table_path: PathBuf,
    pub plot_path: PathBuf,
}

impl SweepSummary {
    /// `final_returns()[k][s]`: final mean return of seed `s` at radius `k`.
    pub fn final_returns(&self) -> Vec<Vec<f64>> {
        self.experiments.iter().map(|e| e.runs.iter().map(|r| r.final_return().unwrap_or(f64::NAN)).collect()).collect()
    }

    pub fn failed(&self) -> bool {
        self.experiments.iter().any(ExperimentSummary::failed)
    }
}

/// Trains once per radius `r` (with spread `0.2 r`) for every seed. All
/// radii of a seed start from the same `θ0`, drawn from
/// `shared_init_seed` if set and from the seed otherwise.
pub fn run_sigma_sweep(config: &ExperimentConfig, make_evaluator: &EvaluatorFactory<'_>) -> Result<SweepSummary> {
    config.validate()?;
    if config.sweep.is_empty() {
        return Err(invalid("a sweep needs at least one radius"));
    }
    let objective = build_objective(config)?;
    fs::create_dir_all(&config.out)?;
    let base = config.stem();
    let mut experiments = Vec::with_capacity(config.sweep.len());
    for (k, &r) in config.sweep.iter().enumerate() {
        let run_config = ExperimentConfig {
            trainer: TrainerConfig { radius_mean: r, radius_spread: 0.2 * r, ..config.trainer.clone() },
            ..config.clone()
        };
        let stem = format!("{base}_r{r}");
        let color = PALETTE[k % PALETTE.len()];
        experiments.push(experiment_files(&run_config, objective.as_ref(), make_evaluator, &stem, color)?);
    }

    let table_path = config.out.join(format!("{base}_sweep.csv"));
    let mut w = csv::Writer::from_path(&table_path)?;
    w.write_record(["radius", "seed", "theta0_checksum", "final_return", "iterations"])?;
    for (e, &r) in experiments.iter().zip(&config.sweep) {
        for run in &e.runs {
            w.write_record([
                r.to_string(),
                run.seed.to_string(),
                format!("{:016x}", run.theta0_checksum),
                run.final_return().map_or_else(|| "nan".into(), |v| v.to_string()),
                run.history.len().to_string(),
            ])?;
        }
    }
    w.flush()?;

    let plot_path = config.out.join(format!("{base}_sweep.png"));
    let series: Vec<Series> = experiments
        .iter()
        .enumerate()
        .map(|(k, e)| Series {
            mean: e.aggregate.iter().map(|r| r.mean_return).collect(),
            band: None,
            color: PALETTE[k % PALETTE.len()],
        })
        .collect();
    plot::save(&series, &plot_path)?;
    let all_runs: Vec<SeedRun> = experiments.iter().flat_map(|e| e.runs.iter().cloned()).collect();
    write_error_log(&config.out, &all_runs)?;
    Ok(SweepSummary { radii: config.sweep.clone(), experiments, table_path, plot_path })
}
