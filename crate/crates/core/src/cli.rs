//! `quadndr simulate|train|eval|version`.
//!
//! Exit codes: 0 on success, 1 on invalid input (bad flags, config, files or
//! shapes), 2 when a run aborts (I/O failure, diverged training).

use std::ffi::OsString;
use std::fs;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::experiment::{self, Method, DATA_DIR, EVAL_DIR, MODELS_DIR};
use crate::nn::{self, model_io::MAGIC};

pub const STRICT_ENV: &str = "QUADNDR_STRICT";

#[derive(Debug, Parser)]
#[command(name = "quadndr", about = "Neural dead reckoning for quadrotors on periodic trajectories", disable_version_flag = true)]
struct Cli {
    /// Log progress to stderr.
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Experiment config file (`key = value` lines).
    #[arg(long)]
    config: PathBuf,
    /// Overrides a config key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Overrides `out_dir`.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Overrides `seed`.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write ground truth plus clean and noisy IMU CSVs for every trajectory.
    Simulate {
        #[command(flatten)]
        common: Common,
    },
    /// Train `runs` seeds of one method on the training trajectories.
    Train {
        #[command(flatten)]
        common: Common,
        /// single, multi, or baseline (distance + height for INS-heading dead reckoning).
        #[arg(long)]
        arch: String,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        runs: Option<usize>,
    },
    /// Score models on the held-out trajectories against the baseline and free INS.
    Eval {
        #[command(flatten)]
        common: Common,
        /// Position-regression model files.
        #[arg(long, num_args = 1.., required = true)]
        models: Vec<PathBuf>,
        /// Distance-model files for the INS-heading baseline.
        #[arg(long, num_args = 1.., required = true)]
        baseline: Vec<PathBuf>,
    },
    /// Print the program and model-format versions.
    Version,
}

fn load_config(common: &Common) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(&common.config)?;
    for kv in &common.overrides {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::invalid(format!("--set expects KEY=VALUE, got `{kv}`")))?;
        cfg.set(k.trim(), v.trim())?;
    }
    if let Some(dir) = &common.out_dir {
        cfg.out_dir = dir.clone();
    }
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// True when `QUADNDR_STRICT=1` requests fixed-order reductions.
pub fn strict_from_env() -> bool {
    std::env::var(STRICT_ENV).is_ok_and(|v| v == "1")
}

fn simulate(cfg: &ExperimentConfig) -> Result<()> {
    let flights = experiment::simulate(cfg)?;
    let dir = cfg.out_dir.join(DATA_DIR);
    experiment::write_flights(&dir, &flights)?;
    fs::write(cfg.out_dir.join("experiment.conf"), cfg.to_text())?;
    println!("wrote {} trajectories to {}", flights.len(), dir.display());
    Ok(())
}

fn train(cfg: &ExperimentConfig, method: Method) -> Result<()> {
    let flights = experiment::read_flights(&cfg.out_dir.join(DATA_DIR))?;
    let (train_flights, _) = experiment::split_flights(cfg, &flights)?;
    let owned: Vec<_> = train_flights.into_iter().cloned().collect();
    let set = experiment::windows(&owned, cfg.window)?;
    let strict = strict_from_env();
    log::info!("training {method} on {} windows from {} trajectories (strict={strict})", set.len(), owned.len());
    let dir = cfg.out_dir.join(MODELS_DIR);
    for r in 0..cfg.runs {
        let run = experiment::train_run(cfg, method, &set, r, strict)?;
        let path = experiment::write_run(&dir, &run)?;
        match run.history.last() {
            Some(loss) => println!("{method} run {r} (seed {}): final train loss {loss:.6e} -> {}", experiment::run_seed(cfg, r), path.display()),
            None => println!("{method} run {r} (seed {}): no epochs, saved initialization -> {}", experiment::run_seed(cfg, r), path.display()),
        }
    }
    Ok(())
}

fn eval(cfg: &ExperimentConfig, models: &[PathBuf], baselines: &[PathBuf]) -> Result<()> {
    let load = |paths: &[PathBuf]| paths.iter().map(|p| nn::load_model(p)).collect::<Result<Vec<_>>>();
    let models = load(models)?;
    let baselines = load(baselines)?;
    for m in models.iter().chain(&baselines) {
        if m.window_size() != cfg.window.window_size {
            return Err(Error::shape(format!(
                "model window size {} does not match configured window_size {}",
                m.window_size(),
                cfg.window.window_size
            )));
        }
    }
    let flights = experiment::read_flights(&cfg.out_dir.join(DATA_DIR))?;
    let (_, test) = experiment::split_flights(cfg, &flights)?;
    let evaluation = experiment::evaluate(&test, cfg.window, &models, &baselines)?;
    let dir = cfg.out_dir.join(EVAL_DIR);
    experiment::write_evaluation(&dir, &evaluation)?;
    for s in &evaluation.summaries {
        let runs: Vec<String> = s.runs.iter().map(|r| format!("{:.4}", r.rmse)).collect();
        let pct = s.improvement_pct.map_or(String::new(), |p| format!("  improvement {p:.1}%"));
        println!("{:<9} rmse {:.4} m (runs: {}){pct}", s.method, s.mean_rmse, runs.join(", "));
    }
    println!("report written to {}", dir.display());
    Ok(())
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate { common } => simulate(&load_config(&common)?),
        Command::Train { common, arch, epochs, runs } => {
            let method: Method = arch.parse()?;
            let mut cfg = load_config(&common)?;
            if let Some(e) = epochs {
                cfg.epochs = e;
            }
            if let Some(r) = runs {
                cfg.runs = r;
            }
            cfg.validate()?;
            train(&cfg, method)
        }
        Command::Eval { common, models, baseline } => eval(&load_config(&common)?, &models, &baseline),
        Command::Version => {
            println!("quadndr {} (model format {MAGIC})", env!("CARGO_PKG_VERSION"));
            Ok(())
        }
    }
}

pub fn exit_code(err: &Error) -> i32 {
    if err.is_validation() {
        1
    } else {
        2
    }
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let level = if cli.verbose { "info" } else { "warn" };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).try_init();
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
