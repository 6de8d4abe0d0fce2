//! Trains the distance baseline and both position regressors on simulated
//! flights, then prints held-out RMSE against the free inertial solution.
//!
//! cargo run --release --example compare_methods -- configs/d5_compare.conf [key=value ...]

use std::time::Instant;

use quadndr::config::ExperimentConfig;
use quadndr::experiment::{self, EVAL_DIR};

fn main() -> quadndr::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let mut args = std::env::args().skip(1);
    let mut cfg = match args.next() {
        Some(path) => ExperimentConfig::load(path.as_ref())?,
        None => ExperimentConfig::default(),
    };
    for kv in args {
        let (k, v) = kv.split_once('=').expect("overrides look like key=value");
        cfg.set(k, v)?;
    }
    cfg.validate()?;

    let start = Instant::now();
    let (eval, runs) = experiment::run_experiment(&cfg, true)?;
    for r in &runs {
        let first = r.history.first().copied().unwrap_or(f64::NAN);
        let last = r.history.last().copied().unwrap_or(f64::NAN);
        println!("{:>8} run {}: loss {first:.4e} -> {last:.4e}", r.method.tag(), r.run);
    }
    println!("\n{:>8}  {:>10}  {:>12}", "method", "rmse [m]", "improvement");
    for s in &eval.summaries {
        let pct = s.improvement_pct.map_or("-".to_string(), |p| format!("{p:.1}%"));
        println!("{:>8}  {:>10.4}  {:>12}", s.method, s.mean_rmse, pct);
    }
    let dir = cfg.out_dir.join(EVAL_DIR);
    experiment::write_evaluation(&dir, &eval)?;
    println!("\nwrote {} in {:.1} s", dir.display(), start.elapsed().as_secs_f64());
    Ok(())
}
