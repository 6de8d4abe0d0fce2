//! Sliding windows over synchronized IMU and ground-truth series.
//!
//! A window of `n` IMU samples starting at index `s` drives the vehicle from
//! `t[s]` to `t[s + n]`, so its label is `p[s + n] - p[s]`. The end index is
//! clamped to the last ground-truth sample for a window that ends flush with
//! the series. With `stride == n` consecutive labels therefore telescope.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::csvio;
use crate::error::{Error, Result};
use crate::ins::Vector3;
use crate::trajectory::{GroundTruthSeries, ImuSeries};

pub const CHANNELS: usize = 6;

/// Floor applied to per-channel standard deviations.
pub const STD_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WindowSpec {
    pub window_size: usize,
    pub stride: usize,
}

impl WindowSpec {
    pub fn new(window_size: usize, stride: usize) -> Result<Self> {
        let spec = Self { window_size, stride };
        spec.validate()?;
        Ok(spec)
    }

    /// 120-sample windows with stride 60, for 120 Hz outdoor logs.
    pub fn outdoor() -> Self {
        Self { window_size: 120, stride: 60 }
    }

    /// 100-sample windows with stride 50, for 100 Hz indoor logs.
    pub fn indoor() -> Self {
        Self { window_size: 100, stride: 50 }
    }

    /// Same window size with no overlap, as used for chaining predictions.
    pub fn non_overlapping(&self) -> Self {
        Self { window_size: self.window_size, stride: self.window_size }
    }

    pub fn validate(&self) -> Result<()> {
        if self.window_size == 0 || self.stride == 0 {
            return Err(Error::invalid("window size and stride must be positive"));
        }
        if self.stride > self.window_size {
            return Err(Error::invalid(format!(
                "stride {} exceeds window size {}",
                self.stride, self.window_size
            )));
        }
        Ok(())
    }

    pub fn count(&self, len: usize) -> usize {
        if len < self.window_size {
            0
        } else {
            (len - self.window_size) / self.stride + 1
        }
    }
}

/// Sample indices a window covers: IMU samples `start..start + n`, with the
/// label measured from `start` to `end`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WindowSpan {
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindowedSample {
    pub tag: String,
    /// `6 × n`, row-major: rows are fx, fy, fz, wx, wy, wz.
    pub input: Vec<f64>,
    pub label: Vector3,
    /// Present when the sample was cut from a series in this process.
    pub span: Option<WindowSpan>,
}

impl WindowedSample {
    pub fn window_size(&self) -> usize {
        self.input.len() / CHANNELS
    }

    /// Accelerometer rows (`3 × n`).
    pub fn accel(&self) -> &[f64] {
        &self.input[..self.input.len() / 2]
    }

    /// Gyroscope rows (`3 × n`).
    pub fn gyro(&self) -> &[f64] {
        &self.input[self.input.len() / 2..]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    pub spec: WindowSpec,
    pub samples: Vec<WindowedSample>,
}

impl SampleSet {
    pub fn empty(spec: WindowSpec) -> Self {
        Self { spec, samples: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Distinct source tags, sorted.
    pub fn tags(&self) -> Vec<String> {
        self.samples
            .iter()
            .map(|s| s.tag.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    }

    pub fn extend(&mut self, other: SampleSet) -> Result<()> {
        if other.spec.window_size != self.spec.window_size {
            return Err(Error::shape(format!(
                "cannot merge window sizes {} and {}",
                self.spec.window_size, other.spec.window_size
            )));
        }
        self.samples.extend(other.samples);
        Ok(())
    }

    pub fn labels(&self) -> Vec<Vector3> {
        self.samples.iter().map(|s| s.label).collect()
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = BufWriter::new(File::create(path)?);
        writeln!(
            out,
            "# window_size={} stride={}",
            self.spec.window_size, self.spec.stride
        )?;
        let mut w = csv::Writer::from_writer(out);
        w.write_record(sample_header(self.spec.window_size))?;
        for s in &self.samples {
            let mut record = Vec::with_capacity(4 + s.input.len());
            record.push(s.tag.clone());
            record.extend(s.label.iter().map(|v| csvio::format_f64(*v)));
            record.extend(s.input.iter().map(|v| csvio::format_f64(*v)));
            w.write_record(&record)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let (meta, body) = csvio::split_comment_line(File::open(path)?)?;
        let spec = parse_meta(&meta).map_err(|msg| Error::format(path, msg))?;
        let header = sample_header(spec.window_size);
        let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(body.as_slice());
        if r.headers()?.iter().ne(header.iter().map(String::as_str)) {
            return Err(Error::format(path, "sample-set header does not match window size"));
        }
        let mut samples = Vec::new();
        for (i, record) in r.records().enumerate() {
            let record = record?;
            if record.len() != header.len() {
                return Err(Error::format(path, format!("row {}: wrong column count", i + 1)));
            }
            let values = record
                .iter()
                .skip(1)
                .map(csvio::parse_f64)
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|msg| Error::format(path, format!("row {}: {msg}", i + 1)))?;
            samples.push(WindowedSample {
                tag: record[0].to_string(),
                label: Vector3::new(values[0], values[1], values[2]),
                input: values[3..].to_vec(),
                span: None,
            });
        }
        Ok(Self { spec, samples })
    }
}

fn sample_header(n: usize) -> Vec<String> {
    let mut h: Vec<String> = ["tag", "label_dx", "label_dy", "label_dz"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    for c in 0..CHANNELS {
        h.extend((0..n).map(|i| format!("c{c}_{i}")));
    }
    h
}

fn parse_meta(line: &str) -> std::result::Result<WindowSpec, String> {
    let rest = line
        .strip_prefix('#')
        .ok_or_else(|| "missing `# window_size=<n> stride=<s>` line".to_string())?;
    let mut window = None;
    let mut stride = None;
    for part in rest.split_whitespace() {
        let (k, v) = part.split_once('=').ok_or_else(|| format!("bad metadata `{part}`"))?;
        let v: usize = v.parse().map_err(|_| format!("bad metadata value `{part}`"))?;
        match k {
            "window_size" => window = Some(v),
            "stride" => stride = Some(v),
            _ => return Err(format!("unknown metadata key `{k}`")),
        }
    }
    match (window, stride) {
        (Some(n), Some(s)) => WindowSpec::new(n, s).map_err(|e| e.to_string()),
        _ => Err("metadata needs both window_size and stride".into()),
    }
}

/// Cuts an IMU stream into `6 × n` window inputs without labels.
pub fn window_imu(imu: &ImuSeries, spec: WindowSpec) -> Result<Vec<(WindowSpan, Vec<f64>)>> {
    spec.validate()?;
    let len = imu.len();
    let n = spec.window_size;
    let samples = imu.samples();
    Ok((0..spec.count(len))
        .map(|k| {
            let start = k * spec.stride;
            let end = (start + n).min(len - 1);
            let mut input = vec![0.0; CHANNELS * n];
            for (i, s) in samples[start..start + n].iter().enumerate() {
                for axis in 0..3 {
                    input[axis * n + i] = s.f[axis];
                    input[(axis + 3) * n + i] = s.w[axis];
                }
            }
            (WindowSpan { start, end }, input)
        })
        .collect())
}

/// Cuts a synchronized pair of series into labelled windows.
pub fn window_series(
    imu: &ImuSeries,
    gt: &GroundTruthSeries,
    spec: WindowSpec,
    tag: &str,
) -> Result<SampleSet> {
    spec.validate()?;
    let len = imu.len();
    if gt.len() != len {
        return Err(Error::shape(format!(
            "imu has {len} samples but ground truth has {}",
            gt.len()
        )));
    }
    let ts = gt.timestamps();
    if len >= 2 {
        let half_period = 0.5 * (ts[len - 1] - ts[0]) / (len - 1) as f64;
        if let Some(i) = imu
            .samples()
            .iter()
            .zip(ts)
            .position(|(s, t)| (s.t - t).abs() >= half_period)
        {
            return Err(Error::invalid(format!(
                "imu and ground truth timestamps disagree at index {i}"
            )));
        }
    }

    let positions = gt.positions();
    let out: Vec<WindowedSample> = window_imu(imu, spec)?
        .into_iter()
        .map(|(span, input)| WindowedSample {
            tag: tag.to_string(),
            input,
            label: positions[span.end] - positions[span.start],
            span: Some(span),
        })
        .collect();
    let (n, count) = (spec.window_size, out.len());
    let used = if count == 0 { 0 } else { (count - 1) * spec.stride + n };
    if used < len {
        log::debug!("{tag}: {} trailing samples not covered by a window", len - used);
    }
    Ok(SampleSet { spec, samples: out })
}

/// Trajectory-level split: every tag lands wholly in train or test.
pub fn split(set: &SampleSet, test_fraction: f64, seed: u64) -> Result<(SampleSet, SampleSet)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::invalid(format!(
            "test fraction must lie in (0, 1), got {test_fraction}"
        )));
    }
    let mut tags = set.tags();
    if tags.len() < 2 {
        return Err(Error::invalid(format!(
            "trajectory-level split needs at least 2 source tags, found {}",
            tags.len()
        )));
    }
    let n_test = ((test_fraction * tags.len() as f64).round() as usize).clamp(1, tags.len() - 1);
    tags.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let test_tags: BTreeSet<String> = tags.into_iter().take(n_test).collect();

    let (test, train): (Vec<_>, Vec<_>) = set
        .samples
        .iter()
        .cloned()
        .partition(|s| test_tags.contains(&s.tag));
    Ok((
        SampleSet { spec: set.spec, samples: train },
        SampleSet { spec: set.spec, samples: test },
    ))
}

/// Per-channel mean and standard deviation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormStats {
    pub mean: [f64; CHANNELS],
    pub std: [f64; CHANNELS],
}

impl NormStats {
    pub fn identity() -> Self {
        Self { mean: [0.0; CHANNELS], std: [1.0; CHANNELS] }
    }

    pub fn fit(set: &SampleSet) -> Result<Self> {
        if set.is_empty() {
            return Err(Error::invalid("cannot compute statistics of an empty sample set"));
        }
        let n = set.spec.window_size;
        let count = (set.len() * n) as f64;
        let mut mean = [0.0; CHANNELS];
        let mut std = [0.0; CHANNELS];
        for c in 0..CHANNELS {
            let sum: f64 = set.samples.iter().flat_map(|s| &s.input[c * n..(c + 1) * n]).sum();
            mean[c] = sum / count;
            let ss: f64 = set
                .samples
                .iter()
                .flat_map(|s| &s.input[c * n..(c + 1) * n])
                .map(|x| (x - mean[c]).powi(2))
                .sum();
            std[c] = (ss / count).sqrt().max(STD_FLOOR);
        }
        Ok(Self { mean, std })
    }

    pub fn apply_input(&self, input: &mut [f64]) {
        let n = input.len() / CHANNELS;
        for (c, row) in input.chunks_mut(n).enumerate() {
            for x in row {
                *x = (*x - self.mean[c]) / self.std[c];
            }
        }
    }

    /// Standardizes every sample with these statistics.
    pub fn apply(&self, set: &SampleSet) -> SampleSet {
        let mut out = set.clone();
        for s in &mut out.samples {
            self.apply_input(&mut s.input);
        }
        out
    }
}

/// Standardizes a set with its own statistics and returns them for reuse.
pub fn normalize(set: &SampleSet) -> Result<(SampleSet, NormStats)> {
    let stats = NormStats::fit(set)?;
    Ok((stats.apply(set), stats))
}
