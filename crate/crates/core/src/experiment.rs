//! End-to-end experiment: simulate flights, train the three regressors and
//! compare them with the free inertial solution.
//!
//! On disk an experiment lives under `out_dir`:
//!
//! ```text
//! data/traj_000/{gt.csv, imu_clean.csv, imu_noisy.csv}
//! models/<method>_run<r>.qpnet, models/<method>_run<r>_loss.csv
//! eval/report.txt, eval/report.csv, eval/<tag>_<method>.csv, eval/<tag>_xz.svg
//! ```

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::ExperimentConfig;
use crate::csvio;
use crate::dataset::{self, NormStats, SampleSet, WindowSpec};
use crate::deadreckon::{self, baseline_target, EvalReport, PredictedTrajectory};
use crate::error::{Error, Result};
use crate::ins::{self, Vector3};
use crate::nn::{self, Architecture, Example, Model, NetConfig, NetworkParams, TrainConfig};
use crate::plot::{self, Series};
use crate::trajectory::{corrupt_imu, generate_periodic_trajectory, inverse_mechanize, GroundTruthSeries, ImuSeries, TrajectoryProfile};

pub const DATA_DIR: &str = "data";
pub const MODELS_DIR: &str = "models";
pub const EVAL_DIR: &str = "eval";
pub const INS_TAG: &str = "ins";

/// What a trained model regresses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// Position change per window.
    Direct(Architecture),
    /// Horizontal distance and height change, steered by INS heading.
    Baseline,
}

impl Method {
    pub fn tag(&self) -> &'static str {
        match self {
            Method::Direct(a) => a.tag(),
            Method::Baseline => "baseline",
        }
    }

    pub fn outputs(&self) -> usize {
        match self {
            Method::Direct(_) => 3,
            Method::Baseline => 2,
        }
    }

    /// Recovers the method from a loaded model's shape.
    pub fn of_model(model: &Model) -> Result<Self> {
        match model.params.config.outputs {
            3 => Ok(Method::Direct(model.params.config.arch)),
            2 if model.params.config.arch == Architecture::SingleHead => Ok(Method::Baseline),
            n => Err(Error::shape(format!("cannot interpret a {n}-output {} model", model.params.config.arch))),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "baseline" => Ok(Method::Baseline),
            other => other.parse().map(Method::Direct),
        }
    }
}

/// One simulated flight.
#[derive(Debug, Clone, PartialEq)]
pub struct Flight {
    pub tag: String,
    pub gt: GroundTruthSeries,
    pub imu_clean: ImuSeries,
    pub imu_noisy: ImuSeries,
}

/// Per-flight profiles: the nominal one with seeded uniform jitter.
pub fn flight_profiles(cfg: &ExperimentConfig) -> Vec<TrajectoryProfile> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut jitter = |frac: f64| if frac > 0.0 { 1.0 + rng.random_range(-frac..=frac) } else { 1.0 };
    (0..cfg.trajectories)
        .map(|_| {
            let p = cfg.profile;
            TrajectoryProfile {
                speed: p.speed * jitter(cfg.speed_jitter),
                amplitude: p.amplitude * jitter(cfg.amplitude_jitter),
                hover_height: p.hover_height * jitter(cfg.hover_jitter),
                ..p
            }
        })
        .collect()
}

pub fn flight_tag(i: usize) -> String {
    format!("traj_{i:03}")
}

pub fn simulate(cfg: &ExperimentConfig) -> Result<Vec<Flight>> {
    cfg.validate()?;
    let g = ins::default_gravity();
    flight_profiles(cfg)
        .iter()
        .enumerate()
        .map(|(i, profile)| {
            let gt = generate_periodic_trajectory(profile)?;
            let imu_clean = inverse_mechanize(&gt, &g)?;
            let noise = cfg.imu.with_seed(cfg.imu.seed.wrapping_add(i as u64));
            let imu_noisy = corrupt_imu(&imu_clean, &noise)?;
            Ok(Flight { tag: flight_tag(i), gt, imu_clean, imu_noisy })
        })
        .collect()
}

pub fn write_flights(dir: &Path, flights: &[Flight]) -> Result<()> {
    for f in flights {
        let d = dir.join(&f.tag);
        fs::create_dir_all(&d)?;
        f.gt.write_csv(&d.join("gt.csv"))?;
        f.imu_clean.write_csv(&d.join("imu_clean.csv"))?;
        f.imu_noisy.write_csv(&d.join("imu_noisy.csv"))?;
    }
    Ok(())
}

/// Loads every `traj_*` directory under `dir`, sorted by tag.
pub fn read_flights(dir: &Path) -> Result<Vec<Flight>> {
    let mut tags: Vec<String> = fs::read_dir(dir)
        .map_err(|e| Error::invalid(format!("cannot read dataset directory {}: {e}", dir.display())))?
        .filter_map(|e| e.ok())
        .filter(|e| e.path().is_dir())
        .filter_map(|e| e.file_name().into_string().ok())
        .filter(|n| n.starts_with("traj_"))
        .collect();
    tags.sort();
    if tags.is_empty() {
        return Err(Error::invalid(format!("no trajectories found in {}", dir.display())));
    }
    tags.into_iter()
        .map(|tag| {
            let d = dir.join(&tag);
            Ok(Flight {
                gt: GroundTruthSeries::read_csv(&d.join("gt.csv"))?,
                imu_clean: ImuSeries::read_csv(&d.join("imu_clean.csv"))?,
                imu_noisy: ImuSeries::read_csv(&d.join("imu_noisy.csv"))?,
                tag,
            })
        })
        .collect()
}

/// Labelled windows of the noisy IMU streams.
pub fn windows(flights: &[Flight], spec: WindowSpec) -> Result<SampleSet> {
    let mut set = SampleSet::empty(spec);
    for f in flights {
        set.extend(dataset::window_series(&f.imu_noisy, &f.gt, spec, &f.tag)?)?;
    }
    Ok(set)
}

/// Deterministic trajectory-level train/test partition.
pub fn split_flights<'a>(cfg: &ExperimentConfig, flights: &'a [Flight]) -> Result<(Vec<&'a Flight>, Vec<&'a Flight>)> {
    let tags: Vec<_> = flights.iter().map(|f| f.tag.clone()).collect();
    // one stub window per flight is enough to drive the tag-level split
    let stub = SampleSet {
        spec: cfg.window,
        samples: tags
            .iter()
            .map(|t| dataset::WindowedSample { tag: t.clone(), input: Vec::new(), label: Vector3::zeros(), span: None })
            .collect(),
    };
    let (_, test) = dataset::split(&stub, cfg.test_fraction, cfg.seed)?;
    let test_tags = test.tags();
    Ok(flights.iter().partition(|f| !test_tags.contains(&f.tag)))
}

pub fn net_config(cfg: &ExperimentConfig, method: Method) -> NetConfig {
    let (arch, channels) = match method {
        Method::Direct(Architecture::MultiHead) => (Architecture::MultiHead, cfg.multi_conv_channels),
        Method::Direct(Architecture::SingleHead) | Method::Baseline => (Architecture::SingleHead, cfg.conv_channels),
    };
    NetConfig {
        arch,
        window_size: cfg.window.window_size,
        conv_channels: channels,
        kernel_size: cfg.kernel_size,
        hidden: cfg.hidden,
        outputs: method.outputs(),
        alpha: cfg.alpha,
        dropout: cfg.dropout,
    }
}

#[derive(Debug, Clone)]
pub struct TrainedRun {
    pub method: Method,
    pub run: usize,
    pub model: Model,
    /// Mean training loss per epoch.
    pub history: Vec<f64>,
}

pub fn run_seed(cfg: &ExperimentConfig, run: usize) -> u64 {
    cfg.seed.wrapping_add(run as u64)
}

/// Trains run `run` of `method` on raw (unnormalized) windows.
pub fn train_run(cfg: &ExperimentConfig, method: Method, train: &SampleSet, run: usize, strict: bool) -> Result<TrainedRun> {
    if train.spec.window_size != cfg.window.window_size {
        return Err(Error::shape("training windows do not match the configured window size"));
    }
    let seed = run_seed(cfg, run);
    let norm = NormStats::fit(train)?;
    let normalized = norm.apply(train);
    let examples: Vec<Example<'_>> = normalized
        .samples
        .iter()
        .map(|s| Example {
            input: &s.input,
            target: match method {
                Method::Direct(_) => s.label.as_slice().to_vec(),
                Method::Baseline => baseline_target(&s.label).to_vec(),
            },
        })
        .collect();
    let mut params = NetworkParams::init(net_config(cfg, method), seed)?;
    let tc = TrainConfig { batch_size: cfg.batch_size, lr: cfg.lr, epochs: cfg.epochs, seed, strict };
    let history = nn::train(&mut params, &examples, &tc)?;
    Ok(TrainedRun { method, run, model: Model { params, norm: Some(norm) }, history })
}

pub fn train_runs(cfg: &ExperimentConfig, method: Method, train: &SampleSet, strict: bool) -> Result<Vec<TrainedRun>> {
    (0..cfg.runs).map(|r| train_run(cfg, method, train, r, strict)).collect()
}

pub fn model_path(dir: &Path, method: Method, run: usize) -> PathBuf {
    dir.join(format!("{}_run{run}.qpnet", method.tag()))
}

pub fn write_run(dir: &Path, run: &TrainedRun) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let path = model_path(dir, run.method, run.run);
    nn::save_model(&run.model, &path)?;
    let loss_path = dir.join(format!("{}_run{}_loss.csv", run.method.tag(), run.run));
    let rows = run.history.iter().enumerate().map(|(e, l)| vec![(e + 1) as f64, *l]);
    csvio::write_numeric_file(&loss_path, &["epoch", "loss"], rows)?;
    Ok(path)
}

/// One method's trajectory on one flight.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub method: String,
    pub run: usize,
    pub trajectory: PredictedTrajectory,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlightResult {
    pub tag: String,
    pub t0: f64,
    pub reference: PredictedTrajectory,
    pub predictions: Vec<Prediction>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodSummary {
    pub method: String,
    /// One report per run, pooled over every test flight.
    pub runs: Vec<EvalReport>,
    pub mean_rmse: f64,
    /// Relative to the mean baseline RMSE, when a baseline was scored.
    pub improvement_pct: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub flights: Vec<FlightResult>,
    pub summaries: Vec<MethodSummary>,
}

impl Evaluation {
    pub fn summary(&self, method: &str) -> Option<&MethodSummary> {
        self.summaries.iter().find(|s| s.method == method)
    }
}

/// `100 · (baseline − method) / baseline`.
pub fn improvement_pct(baseline_rmse: f64, method_rmse: f64) -> f64 {
    100.0 * (baseline_rmse - method_rmse) / baseline_rmse
}

/// Runs every model (and the free INS) over the test flights.
pub fn predict_flights(flights: &[&Flight], spec: WindowSpec, models: &[Model], baselines: &[Model]) -> Result<Vec<FlightResult>> {
    let spec = spec.non_overlapping();
    let g = ins::default_gravity();
    let mut labelled: Vec<(String, usize, &Model, Method)> = Vec::new();
    for (pool, want_baseline) in [(baselines, true), (models, false)] {
        for m in pool {
            let method = Method::of_model(m)?;
            if (method == Method::Baseline) != want_baseline {
                return Err(Error::invalid(format!(
                    "a {method} model was passed where {} models are expected",
                    if want_baseline { "baseline" } else { "position-regression" }
                )));
            }
            let run = labelled.iter().filter(|(t, ..)| t == method.tag()).count();
            labelled.push((method.tag().to_string(), run, m, method));
        }
    }

    flights
        .iter()
        .map(|f| {
            let init = f.gt.initial_state()?;
            let mut predictions = vec![Prediction {
                method: INS_TAG.into(),
                run: 0,
                trajectory: deadreckon::run_pure_ins(&f.imu_noisy, &init, spec, &g)?,
            }];
            for (tag, run, model, method) in &labelled {
                let trajectory = match method {
                    Method::Baseline => deadreckon::run_baseline(&f.imu_noisy, model, &init, spec, &g)?,
                    Method::Direct(_) => deadreckon::run_quadposnet(&f.imu_noisy, model, init.position, spec)?,
                };
                predictions.push(Prediction { method: tag.clone(), run: *run, trajectory });
            }
            Ok(FlightResult {
                tag: f.tag.clone(),
                t0: f.gt.timestamps()[0],
                reference: deadreckon::reference_trajectory(&f.gt, spec)?,
                predictions,
            })
        })
        .collect()
}

/// Pools each (method, run) over the flights and averages runs per method.
pub fn summarize(flights: &[FlightResult]) -> Result<Vec<MethodSummary>> {
    let first = flights.first().ok_or_else(|| Error::invalid("no flights to summarize"))?;
    let mut keys: Vec<(String, usize)> = Vec::new();
    for p in &first.predictions {
        if !keys.contains(&(p.method.clone(), p.run)) {
            keys.push((p.method.clone(), p.run));
        }
    }
    let mut summaries: Vec<MethodSummary> = Vec::new();
    for (method, run) in keys {
        let mut gt = Vec::new();
        let mut pred = Vec::new();
        for f in flights {
            let p = f
                .predictions
                .iter()
                .find(|p| p.method == method && p.run == run)
                .ok_or_else(|| Error::invalid(format!("{} lacks a {method} run {run} prediction", f.tag)))?;
            gt.extend_from_slice(&f.reference.points);
            pred.extend_from_slice(&p.trajectory.points);
        }
        let report = deadreckon::rmse(&gt, &pred)?.with_method(method.clone());
        match summaries.iter_mut().find(|s| s.method == method) {
            Some(s) => s.runs.push(report),
            None => summaries.push(MethodSummary { method, runs: vec![report], mean_rmse: 0.0, improvement_pct: None }),
        }
    }
    for s in &mut summaries {
        s.mean_rmse = s.runs.iter().map(|r| r.rmse).sum::<f64>() / s.runs.len() as f64;
    }
    if let Some(base) = summaries.iter().find(|s| s.method == Method::Baseline.tag()).map(|s| s.mean_rmse) {
        for s in &mut summaries {
            s.improvement_pct = Some(improvement_pct(base, s.mean_rmse));
        }
    }
    Ok(summaries)
}

pub fn evaluate(flights: &[&Flight], spec: WindowSpec, models: &[Model], baselines: &[Model]) -> Result<Evaluation> {
    let flights = predict_flights(flights, spec, models, baselines)?;
    let summaries = summarize(&flights)?;
    Ok(Evaluation { flights, summaries })
}

pub fn report_text(eval: &Evaluation) -> String {
    let mut out = String::new();
    let methods: Vec<&str> = eval.summaries.iter().map(|s| s.method.as_str()).collect();
    let tags: Vec<&str> = eval.flights.iter().map(|f| f.tag.as_str()).collect();
    out.push_str(&format!("methods={}\ntest_trajectories={}\n", methods.join(","), tags.join(",")));
    for s in &eval.summaries {
        for (r, report) in s.runs.iter().enumerate() {
            out.push_str(&report.to_key_values(&format!("{}.run{r}", s.method)));
        }
        out.push_str(&format!("{}.runs={}\n{}.rmse_mean={}\n", s.method, s.runs.len(), s.method, s.mean_rmse));
        if let Some(pct) = s.improvement_pct {
            out.push_str(&format!("{}.improvement_pct={pct}\n", s.method));
        }
    }
    out
}

pub const REPORT_HEADER: [&str; 9] =
    ["method", "run", "rmse", "rmse_x", "rmse_y", "rmse_z", "rmse_horizontal", "windows", "improvement_pct"];

pub fn write_report_csv(path: &Path, eval: &Evaluation) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(REPORT_HEADER)?;
    let base = eval.summary(Method::Baseline.tag()).map(|s| s.mean_rmse);
    let pct = |rmse: f64| base.map_or(String::new(), |b| improvement_pct(b, rmse).to_string());
    for s in &eval.summaries {
        for (r, rep) in s.runs.iter().enumerate() {
            w.write_record([
                s.method.clone(),
                r.to_string(),
                rep.rmse.to_string(),
                rep.per_axis.x.to_string(),
                rep.per_axis.y.to_string(),
                rep.per_axis.z.to_string(),
                rep.horizontal.to_string(),
                rep.num_windows.to_string(),
                pct(rep.rmse),
            ])?;
        }
        let n = s.runs.len() as f64;
        let mean = |f: fn(&EvalReport) -> f64| (s.runs.iter().map(f).sum::<f64>() / n).to_string();
        w.write_record([
            s.method.clone(),
            "mean".into(),
            s.mean_rmse.to_string(),
            mean(|r| r.per_axis.x),
            mean(|r| r.per_axis.y),
            mean(|r| r.per_axis.z),
            mean(|r| r.horizontal),
            s.runs[0].num_windows.to_string(),
            s.improvement_pct.map_or(String::new(), |p| p.to_string()),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes the report, one trajectory CSV per (flight, method, run) and an
/// x–z plot per flight of ground truth against the first run of each
/// learned method.
pub fn write_evaluation(dir: &Path, eval: &Evaluation) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("report.txt"), report_text(eval))?;
    write_report_csv(&dir.join("report.csv"), eval)?;
    for f in &eval.flights {
        f.reference.write_csv(&dir.join(format!("{}_gt.csv", f.tag)), f.t0)?;
        for p in &f.predictions {
            let name = if p.method == INS_TAG { format!("{}_{}.csv", f.tag, p.method) } else { format!("{}_{}_run{}.csv", f.tag, p.method, p.run) };
            p.trajectory.write_csv(&dir.join(name), f.t0)?;
        }
        let with_anchor = |t: &PredictedTrajectory| -> Vec<Vector3> { std::iter::once(t.anchor).chain(t.points.iter().copied()).collect() };
        let gt = with_anchor(&f.reference);
        // the free INS drifts by orders of magnitude and would flatten the plot
        let learned: Vec<(&str, Vec<Vector3>)> = f
            .predictions
            .iter()
            .filter(|p| p.run == 0 && p.method != INS_TAG)
            .map(|p| (p.method.as_str(), with_anchor(&p.trajectory)))
            .collect();
        let mut series = vec![Series { label: "ground truth", points: &gt }];
        series.extend(learned.iter().map(|(l, pts)| Series { label: l, points: pts }));
        plot::write_xz_svg(&dir.join(format!("{}_xz.svg", f.tag)), &format!("{} x-z", f.tag), &series)?;
    }
    Ok(())
}

/// Everything in memory: simulate, split, train each method `runs` times and
/// evaluate on the held-out flights.
pub fn run_experiment(cfg: &ExperimentConfig, strict: bool) -> Result<(Evaluation, Vec<TrainedRun>)> {
    let flights = simulate(cfg)?;
    let (train_flights, test_flights) = split_flights(cfg, &flights)?;
    let train_owned: Vec<Flight> = train_flights.into_iter().cloned().collect();
    let train_set = windows(&train_owned, cfg.window)?;
    let mut runs = Vec::new();
    for method in [Method::Baseline, Method::Direct(Architecture::SingleHead), Method::Direct(Architecture::MultiHead)] {
        let trained = train_runs(cfg, method, &train_set, strict)?;
        for r in &trained {
            log::info!("{method} run {}: final loss {:?}", r.run, r.history.last());
        }
        runs.extend(trained);
    }
    let (baselines, models): (Vec<&TrainedRun>, Vec<&TrainedRun>) = runs.iter().partition(|r| r.method == Method::Baseline);
    let baselines: Vec<Model> = baselines.into_iter().map(|r| r.model.clone()).collect();
    let models: Vec<Model> = models.into_iter().map(|r| r.model.clone()).collect();
    let eval = evaluate(&test_flights, cfg.window, &models, &baselines)?;
    Ok((eval, runs))
}
