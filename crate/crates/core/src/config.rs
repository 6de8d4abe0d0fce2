//! Flat `key = value` experiment configuration.
//!
//! ```text
//! # trajectories
//! trajectories = 24
//! speed_jitter = 0.25
//! gyro_bias_z = 0.01
//! window_size = 100
//! epochs = 30
//! ```
//!
//! Blank lines and `#` comments are ignored. Unknown keys are rejected so a
//! typo cannot silently fall back to a default.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::dataset::WindowSpec;
use crate::error::{Error, Result};
use crate::nn::network::CONV_LAYERS;
use crate::trajectory::{ImuErrorModel, TrajectoryProfile};

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    /// Nominal flight; each trajectory perturbs it by the jitter fractions.
    pub profile: TrajectoryProfile,
    pub trajectories: usize,
    pub speed_jitter: f64,
    pub amplitude_jitter: f64,
    pub hover_jitter: f64,
    /// Seeds are `imu.seed + trajectory index`.
    pub imu: ImuErrorModel,
    pub window: WindowSpec,
    pub test_fraction: f64,
    /// Convolution widths of the single-head network and the baseline.
    pub conv_channels: [usize; CONV_LAYERS],
    /// Per-branch convolution widths of the multi-head network.
    pub multi_conv_channels: [usize; CONV_LAYERS],
    pub kernel_size: usize,
    pub hidden: [usize; 2],
    pub alpha: f64,
    pub dropout: f64,
    pub batch_size: usize,
    pub lr: f64,
    pub epochs: usize,
    pub seed: u64,
    pub runs: usize,
    pub out_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            profile: TrajectoryProfile::d5(),
            trajectories: 8,
            speed_jitter: 0.0,
            amplitude_jitter: 0.0,
            hover_jitter: 0.0,
            imu: ImuErrorModel::default(),
            window: WindowSpec::indoor(),
            test_fraction: 0.25,
            conv_channels: [64, 64, 128, 128, 256, 256],
            multi_conv_channels: [32, 32, 64, 64, 128, 128],
            kernel_size: 3,
            hidden: [512, 128],
            alpha: 0.01,
            dropout: 0.2,
            batch_size: 64,
            lr: 1e-3,
            epochs: 30,
            seed: 0,
            runs: 3,
            out_dir: PathBuf::from("out"),
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::invalid(format!("config key `{key}`: cannot parse `{value}`")))
}

fn parse_list<const N: usize>(key: &str, value: &str) -> Result<[usize; N]> {
    let items: Vec<usize> = value.split(',').map(|v| parse(key, v.trim())).collect::<Result<_>>()?;
    items
        .try_into()
        .map_err(|_| Error::invalid(format!("config key `{key}` needs {N} comma-separated values")))
}

fn join(values: &[usize]) -> String {
    values.iter().map(usize::to_string).collect::<Vec<_>>().join(",")
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::format(path, format!("cannot read config: {e}")))?;
        Self::parse_str(&text).map_err(|e| match e {
            Error::Invalid(msg) => Error::format(path, msg),
            other => other,
        })
    }

    pub fn parse_str(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::invalid(format!("line {}: expected `key = value`", i + 1)))?;
            cfg.set(key.trim(), value.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Applies one `key=value` override, as from the command line.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let p = &mut self.profile;
        let m = &mut self.imu;
        match key {
            "hover_height" => p.hover_height = parse(key, value)?,
            "amplitude" => p.amplitude = parse(key, value)?,
            "p2p_distance" => p.p2p_distance = parse(key, value)?,
            "total_span" => p.total_span = parse(key, value)?,
            "speed" => p.speed = parse(key, value)?,
            "sample_rate" => p.sample_rate = parse(key, value)?,
            "heading" => p.heading = parse(key, value)?,
            "trajectories" => self.trajectories = parse(key, value)?,
            "speed_jitter" => self.speed_jitter = parse(key, value)?,
            "amplitude_jitter" => self.amplitude_jitter = parse(key, value)?,
            "hover_jitter" => self.hover_jitter = parse(key, value)?,
            "accel_noise_std" => m.accel_noise_std = parse(key, value)?,
            "gyro_noise_std" => m.gyro_noise_std = parse(key, value)?,
            "accel_bias_x" => m.accel_bias.x = parse(key, value)?,
            "accel_bias_y" => m.accel_bias.y = parse(key, value)?,
            "accel_bias_z" => m.accel_bias.z = parse(key, value)?,
            "gyro_bias_x" => m.gyro_bias.x = parse(key, value)?,
            "gyro_bias_y" => m.gyro_bias.y = parse(key, value)?,
            "gyro_bias_z" => m.gyro_bias.z = parse(key, value)?,
            "noise_seed" => m.seed = parse(key, value)?,
            "window_size" => self.window.window_size = parse(key, value)?,
            "stride" => self.window.stride = parse(key, value)?,
            "test_fraction" => self.test_fraction = parse(key, value)?,
            "conv_channels" => self.conv_channels = parse_list(key, value)?,
            "multi_conv_channels" => self.multi_conv_channels = parse_list(key, value)?,
            "kernel_size" => self.kernel_size = parse(key, value)?,
            "hidden" => self.hidden = parse_list(key, value)?,
            "alpha" => self.alpha = parse(key, value)?,
            "dropout" => self.dropout = parse(key, value)?,
            "batch_size" => self.batch_size = parse(key, value)?,
            "lr" => self.lr = parse(key, value)?,
            "epochs" => self.epochs = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "runs" => self.runs = parse(key, value)?,
            "out_dir" => self.out_dir = PathBuf::from(value),
            other => return Err(Error::invalid(format!("unknown config key `{other}`"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.profile.validate()?;
        self.imu.validate()?;
        self.window.validate()?;
        if self.trajectories < 2 {
            return Err(Error::invalid("need at least 2 trajectories to split train and test"));
        }
        for (name, v) in [
            ("speed_jitter", self.speed_jitter),
            ("amplitude_jitter", self.amplitude_jitter),
            ("hover_jitter", self.hover_jitter),
        ] {
            if !(0.0..1.0).contains(&v) {
                return Err(Error::invalid(format!("{name} must lie in [0, 1), got {v}")));
            }
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(Error::invalid("test_fraction must lie strictly between 0 and 1"));
        }
        if self.batch_size == 0 || self.runs == 0 {
            return Err(Error::invalid("batch_size and runs must be positive"));
        }
        if !(self.lr > 0.0) {
            return Err(Error::invalid("lr must be positive"));
        }
        Ok(())
    }

    /// The canonical text form; parsing it yields `self` again.
    pub fn to_text(&self) -> String {
        let p = &self.profile;
        let m = &self.imu;
        let mut out = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        kv("hover_height", p.hover_height.to_string());
        kv("amplitude", p.amplitude.to_string());
        kv("p2p_distance", p.p2p_distance.to_string());
        kv("total_span", p.total_span.to_string());
        kv("speed", p.speed.to_string());
        kv("sample_rate", p.sample_rate.to_string());
        kv("heading", p.heading.to_string());
        kv("trajectories", self.trajectories.to_string());
        kv("speed_jitter", self.speed_jitter.to_string());
        kv("amplitude_jitter", self.amplitude_jitter.to_string());
        kv("hover_jitter", self.hover_jitter.to_string());
        kv("accel_noise_std", m.accel_noise_std.to_string());
        kv("gyro_noise_std", m.gyro_noise_std.to_string());
        for (i, axis) in ["x", "y", "z"].iter().enumerate() {
            kv(&format!("accel_bias_{axis}"), m.accel_bias[i].to_string());
        }
        for (i, axis) in ["x", "y", "z"].iter().enumerate() {
            kv(&format!("gyro_bias_{axis}"), m.gyro_bias[i].to_string());
        }
        kv("noise_seed", m.seed.to_string());
        kv("window_size", self.window.window_size.to_string());
        kv("stride", self.window.stride.to_string());
        kv("test_fraction", self.test_fraction.to_string());
        kv("conv_channels", join(&self.conv_channels));
        kv("multi_conv_channels", join(&self.multi_conv_channels));
        kv("kernel_size", self.kernel_size.to_string());
        kv("hidden", join(&self.hidden));
        kv("alpha", self.alpha.to_string());
        kv("dropout", self.dropout.to_string());
        kv("batch_size", self.batch_size.to_string());
        kv("lr", self.lr.to_string());
        kv("epochs", self.epochs.to_string());
        kv("seed", self.seed.to_string());
        kv("runs", self.runs.to_string());
        kv("out_dir", self.out_dir.display().to_string());
        out
    }
}
