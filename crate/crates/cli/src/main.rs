//! `dgs-es`: run DGS-ES / vanilla-ES experiments from the command line.
//!
//! Exit status: 0 on success, 1 when a run fails at runtime (partial
//! artifacts and `error.log` are left in the output directory), 2 on usage
//! or configuration errors.

use std::io::{self, BufWriter};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dgs_core::harness::{
    build_objective, local_evaluators, run_experiment, run_sigma_sweep, ExperimentConfig, ExperimentSummary, Task,
};
use dgs_core::parallel::Evaluator;
use dgs_core::wire::{serve, ProcessPool};
use dgs_core::{Algorithm, Error};

#[derive(Debug, Parser)]
#[command(name = "dgs-es", version, about = "Directional Gaussian smoothing ES experiments")]
#[command(args_conflicts_with_subcommands = true)]
struct Cli {
    #[command(subcommand)]
    command: Option<Command>,

    #[command(flatten)]
    run: RunArgs,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Serve evaluation requests on stdin/stdout (used by --process-workers).
    Worker(WorkerArgs),
}

#[derive(Debug, Args)]
struct WorkerArgs {
    #[arg(long, value_parser = parse_task)]
    task: Task,
    #[arg(long, default_value_t = dgs_core::policy::DEFAULT_HIDDEN)]
    hidden: usize,
    #[arg(long, default_value_t = 10)]
    dim: usize,
}

#[derive(Debug, Default, Args)]
struct RunArgs {
    /// Load settings from a TOML config file; flags override it.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// cartpole, mountaincar, pendulum, sphere, shifted-quadratic or multimodal-2d.
    #[arg(long, value_parser = parse_task)]
    task: Option<Task>,
    /// dgs-es or vanilla-es.
    #[arg(long, value_parser = parse_algo)]
    algo: Option<Algorithm>,
    /// Gauss-Hermite order M.
    #[arg(long, value_name = "M")]
    order: Option<usize>,
    /// Mean smoothing radius r.
    #[arg(long, value_name = "R")]
    radius: Option<f64>,
    /// Radius spread β.
    #[arg(long, value_name = "BETA")]
    spread: Option<f64>,
    /// Frame perturbation scale α.
    #[arg(long)]
    alpha: Option<f64>,
    /// Gradient-norm threshold for frame/radius regeneration.
    #[arg(long)]
    trigger_tol: Option<f64>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long, value_name = "N")]
    iters: Option<usize>,
    /// Worker count L.
    #[arg(long, value_name = "L")]
    workers: Option<usize>,
    /// Comma-separated seed list.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    seeds: Option<Vec<u64>>,
    /// Use seeds 0..N.
    #[arg(long, value_name = "N", conflicts_with = "seeds")]
    num_seeds: Option<u64>,
    /// Common random numbers: one evaluation seed per iteration.
    #[arg(long)]
    crn: bool,
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Comma-separated radii; runs a radius sweep instead of one experiment.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    sweep: Option<Vec<f64>>,
    /// Start every run from the parameters drawn for this seed.
    #[arg(long)]
    shared_init_seed: Option<u64>,
    /// Hidden width of the policy network.
    #[arg(long)]
    hidden: Option<usize>,
    /// Dimension of synthetic objectives.
    #[arg(long)]
    dim: Option<usize>,
    /// Reporting rollouts per iteration.
    #[arg(long)]
    eval_episodes: Option<usize>,
    /// Run seeds concurrently, each with its own worker pool.
    #[arg(long)]
    concurrent_seeds: bool,
    /// Evaluate in child processes over the line protocol instead of threads.
    #[arg(long)]
    process_workers: bool,
    /// Write 0 in the wall_ms column so reruns produce identical files.
    #[arg(long)]
    no_timing: bool,
    /// Print the resolved configuration as TOML and exit.
    #[arg(long)]
    print_config: bool,
}

fn parse_task(s: &str) -> Result<Task, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_algo(s: &str) -> Result<Algorithm, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn resolve(args: &RunArgs) -> Result<ExperimentConfig, Error> {
    let mut c = match &args.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    let t = &mut c.trainer;
    macro_rules! set {
        ($($flag:ident => $field:expr),* $(,)?) => {
            $(if let Some(v) = args.$flag.clone() { $field = v; })*
        };
    }
    set!(
        order => t.quad_order,
        radius => t.radius_mean,
        spread => t.radius_spread,
        alpha => t.frame_scale,
        trigger_tol => t.trigger_tol,
        lr => t.learning_rate,
        iters => t.max_iterations,
        workers => t.workers,
        eval_episodes => t.eval_episodes,
    );
    t.crn_mode |= args.crn;
    if args.no_timing {
        t.record_wall_time = false;
    }
    set!(
        task => c.task,
        algo => c.algorithm,
        seeds => c.seeds,
        out => c.out,
        sweep => c.sweep,
        hidden => c.hidden,
        dim => c.dim,
    );
    if let Some(n) = args.num_seeds {
        c.seeds = (0..n).collect();
    }
    if args.shared_init_seed.is_some() {
        c.shared_init_seed = args.shared_init_seed;
    }
    c.concurrent_seeds |= args.concurrent_seeds;
    c.validate()?;
    Ok(c)
}

fn report(label: &str, s: &ExperimentSummary) {
    for run in &s.runs {
        let last = run.final_return().map_or_else(|| "-".to_string(), |v| format!("{v:.4}"));
        let best = run.history.best_mean_return().map_or_else(|| "-".to_string(), |v| format!("{v:.4}"));
        let status = run.error.as_deref().unwrap_or("ok");
        println!(
            "{label}seed {:>3}: iterations {:>5}  final {last:>12}  best {best:>12}  {status}",
            run.seed,
            run.history.len()
        );
    }
    println!("{label}aggregate: {}", s.aggregate_path.display());
    println!("{label}plot: {}", s.plot_path.display());
}

fn run(args: RunArgs) -> ExitCode {
    let config = match resolve(&args) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    if args.print_config {
        return match config.to_toml() {
            Ok(text) => {
                print!("{text}");
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(1)
            }
        };
    }

    let workers = config.trainer.workers;
    let worker_args = vec![
        "worker".to_string(),
        "--task".into(),
        config.task.to_string(),
        "--hidden".into(),
        config.hidden.to_string(),
        "--dim".into(),
        config.dim.to_string(),
    ];
    let exe = std::env::current_exe();
    let spawn_pool = move || -> dgs_core::Result<Box<dyn Evaluator>> {
        let exe = exe.as_ref().map_err(|e| Error::Io(format!("cannot locate own executable: {e}")))?;
        Ok(Box::new(ProcessPool::spawn(exe, &worker_args, workers)?))
    };
    let local = local_evaluators(workers);
    let factory: &(dyn Fn() -> dgs_core::Result<Box<dyn Evaluator>> + Sync) =
        if args.process_workers { &spawn_pool } else { &local };

    let outcome = if config.sweep.is_empty() {
        run_experiment(&config, factory).map(|s| {
            report("", &s);
            s.failed()
        })
    } else {
        run_sigma_sweep(&config, factory).map(|s| {
            for (e, r) in s.experiments.iter().zip(&s.radii) {
                report(&format!("r={r} "), e);
            }
            println!("sweep table: {}", s.table_path.display());
            println!("sweep plot: {}", s.plot_path.display());
            s.failed()
        })
    };
    match outcome {
        Ok(false) => ExitCode::SUCCESS,
        Ok(true) => {
            eprintln!("error: at least one run failed; see {}", config.out.join("error.log").display());
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn worker(args: WorkerArgs) -> ExitCode {
    let config = ExperimentConfig { task: args.task, hidden: args.hidden, dim: args.dim, ..Default::default() };
    let objective = match build_objective(&config) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let stdin = io::stdin().lock();
    let stdout = BufWriter::new(io::stdout().lock());
    match serve(objective.as_ref(), stdin, stdout) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("worker error: {e}");
            ExitCode::from(1)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Some(Command::Worker(args)) => worker(args),
        None => run(cli.run),
    }
}
