//! Chaining per-window predictions into trajectories, and scoring them.
//!
//! Every method is evaluated on non-overlapping windows (stride = window
//! size) and compared with ground truth at the window-end samples.

use std::path::Path;

use crate::csvio;
use crate::dataset::{window_imu, WindowSpan, WindowSpec};
use crate::error::{Error, Result};
use crate::ins::{self, dcm_to_yaw, mechanize_series, NavState, Vector3};
use crate::nn::Model;
use crate::trajectory::{GroundTruthSeries, ImuSeries};

pub const TRAJECTORY_HEADER: [&str; 4] = ["t", "px", "py", "pz"];

#[derive(Debug, Clone, PartialEq)]
pub struct PredictedTrajectory {
    pub anchor: Vector3,
    /// One position per chained window.
    pub points: Vec<Vector3>,
    /// Window-end timestamps, parallel to `points` (empty when unknown).
    pub times: Vec<f64>,
    /// Nominal duration of one window, s.
    pub window_span: f64,
}

impl PredictedTrajectory {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn with_times(mut self, times: Vec<f64>, window_span: f64) -> Result<Self> {
        if times.len() != self.points.len() {
            return Err(Error::shape(format!(
                "{} timestamps for {} points",
                times.len(),
                self.points.len()
            )));
        }
        self.times = times;
        self.window_span = window_span;
        Ok(self)
    }

    /// Writes the anchor (at `t0`) followed by every point.
    pub fn write_csv(&self, path: &Path, t0: f64) -> Result<()> {
        if self.times.len() != self.points.len() {
            return Err(Error::invalid("trajectory has no timestamps"));
        }
        let row = |t: f64, p: &Vector3| vec![t, p.x, p.y, p.z];
        let rows = std::iter::once(row(t0, &self.anchor))
            .chain(self.times.iter().zip(&self.points).map(|(&t, p)| row(t, p)));
        csvio::write_numeric_file(path, &TRAJECTORY_HEADER, rows)
    }

    /// Reads a file written by [`Self::write_csv`]; the first row is the anchor.
    pub fn read_csv(path: &Path) -> Result<Self> {
        let rows = csvio::read_numeric_file(path, &TRAJECTORY_HEADER)?;
        let (first, rest) = rows
            .split_first()
            .ok_or_else(|| Error::format(path, "trajectory file has no rows"))?;
        let anchor = Vector3::new(first[1], first[2], first[3]);
        let points = rest.iter().map(|r| Vector3::new(r[1], r[2], r[3])).collect();
        let times: Vec<f64> = rest.iter().map(|r| r[0]).collect();
        let window_span = times.first().map_or(0.0, |t| t - first[0]);
        Ok(Self { anchor, points, times, window_span })
    }
}

/// `point_k = p0 + Σ_{i≤k} delta_i`.
pub fn integrate_deltas(p0: Vector3, deltas: &[Vector3]) -> Result<PredictedTrajectory> {
    if !ins::all_finite(&p0) {
        return Err(Error::NonFinite("trajectory anchor".into()));
    }
    if let Some(k) = deltas.iter().position(|d| !ins::all_finite(d)) {
        return Err(Error::NonFinite(format!("position increment {k}")));
    }
    let mut p = p0;
    let points = deltas
        .iter()
        .map(|d| {
            p += d;
            p
        })
        .collect();
    Ok(PredictedTrajectory { anchor: p0, points, times: Vec::new(), window_span: 0.0 })
}

/// One horizontal dead-reckoning step: `(x + d cos ψ, y + d sin ψ)`.
pub fn quadnet_update(x: f64, y: f64, d: f64, psi: f64) -> (f64, f64) {
    let (s, c) = psi.sin_cos();
    (x + d * c, y + d * s)
}

/// Training target of the distance model: horizontal length and height change.
pub fn baseline_target(delta: &Vector3) -> [f64; 2] {
    [delta.x.hypot(delta.y), delta.z]
}

fn chaining_windows(imu: &ImuSeries, spec: WindowSpec) -> Result<Vec<(WindowSpan, Vec<f64>)>> {
    if spec.stride != spec.window_size {
        return Err(Error::invalid(format!(
            "chaining needs stride equal to window size, got {} and {}",
            spec.stride, spec.window_size
        )));
    }
    let windows = window_imu(imu, spec)?;
    if windows.is_empty() {
        return Err(Error::invalid(format!(
            "{} imu samples are shorter than one {}-sample window",
            imu.len(),
            spec.window_size
        )));
    }
    Ok(windows)
}

fn check_model(model: &Model, spec: WindowSpec, outputs: usize) -> Result<()> {
    if model.window_size() != spec.window_size {
        return Err(Error::shape(format!(
            "model expects {}-sample windows, data uses {}",
            model.window_size(),
            spec.window_size
        )));
    }
    if model.params.config.outputs != outputs {
        return Err(Error::shape(format!(
            "model has {} outputs, expected {outputs}",
            model.params.config.outputs
        )));
    }
    Ok(())
}

fn timed(traj: PredictedTrajectory, imu: &ImuSeries, spans: &[WindowSpan], spec: WindowSpec) -> Result<PredictedTrajectory> {
    let s = imu.samples();
    let times = spans.iter().map(|w| s[w.end].t).collect();
    let dt = if s.len() > 1 { (s[s.len() - 1].t - s[0].t) / (s.len() - 1) as f64 } else { 0.0 };
    traj.with_times(times, dt * spec.window_size as f64)
}

/// Chains the position increments a three-output model regresses per window.
pub fn run_quadposnet(imu: &ImuSeries, model: &Model, p0: Vector3, spec: WindowSpec) -> Result<PredictedTrajectory> {
    check_model(model, spec, 3)?;
    let windows = chaining_windows(imu, spec)?;
    let deltas = windows
        .iter()
        .map(|(_, x)| model.predict(x).map(|o| Vector3::new(o[0], o[1], o[2])))
        .collect::<Result<Vec<_>>>()?;
    let spans: Vec<WindowSpan> = windows.iter().map(|(s, _)| *s).collect();
    timed(integrate_deltas(p0, &deltas)?, imu, &spans, spec)
}

/// Distance-and-heading dead reckoning.
///
/// The two-output model regresses each window's horizontal distance and
/// height change. Heading comes from mechanizing the whole IMU stream from
/// `init` and reading yaw at the window-end sample, so gyro errors accumulate
/// into the heading exactly as in a free inertial solution.
pub fn run_baseline(
    imu: &ImuSeries,
    distance_model: &Model,
    init: &NavState,
    spec: WindowSpec,
    gravity: &Vector3,
) -> Result<PredictedTrajectory> {
    check_model(distance_model, spec, 2)?;
    let windows = chaining_windows(imu, spec)?;
    let states = mechanize_series(init, imu, gravity)?;
    let mut p = init.position;
    let mut points = Vec::with_capacity(windows.len());
    for (span, x) in &windows {
        let out = distance_model.predict(x)?;
        let psi = dcm_to_yaw(&states[span.end].attitude)?;
        (p.x, p.y) = quadnet_update(p.x, p.y, out[0], psi);
        p.z += out[1];
        points.push(p);
    }
    let spans: Vec<WindowSpan> = windows.iter().map(|(s, _)| *s).collect();
    let traj = PredictedTrajectory { anchor: init.position, points, times: Vec::new(), window_span: 0.0 };
    timed(traj, imu, &spans, spec)
}

/// Free inertial solution sampled at the window-end instants.
pub fn run_pure_ins(imu: &ImuSeries, init: &NavState, spec: WindowSpec, gravity: &Vector3) -> Result<PredictedTrajectory> {
    let windows = chaining_windows(imu, spec)?;
    let states = mechanize_series(init, imu, gravity)?;
    let spans: Vec<WindowSpan> = windows.iter().map(|(s, _)| *s).collect();
    let points = spans.iter().map(|w| states[w.end].position).collect();
    let traj = PredictedTrajectory { anchor: init.position, points, times: Vec::new(), window_span: 0.0 };
    timed(traj, imu, &spans, spec)
}

/// Ground truth at the same window-end instants the methods are scored on.
pub fn reference_trajectory(gt: &GroundTruthSeries, spec: WindowSpec) -> Result<PredictedTrajectory> {
    if spec.stride != spec.window_size {
        return Err(Error::invalid("reference trajectory needs stride equal to window size"));
    }
    spec.validate()?;
    let len = gt.len();
    let n = spec.window_size;
    let count = spec.count(len);
    if count == 0 {
        return Err(Error::invalid("ground truth is shorter than one window"));
    }
    let ends: Vec<usize> = (0..count).map(|k| (k * n + n).min(len - 1)).collect();
    let p = gt.positions();
    let t = gt.timestamps();
    let dt = if len > 1 { (t[len - 1] - t[0]) / (len - 1) as f64 } else { 0.0 };
    Ok(PredictedTrajectory {
        anchor: p[0],
        points: ends.iter().map(|&e| p[e]).collect(),
        times: ends.iter().map(|&e| t[e]).collect(),
        window_span: dt * n as f64,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub rmse: f64,
    pub per_axis: Vector3,
    /// RMSE of the x, y components only.
    pub horizontal: f64,
    pub num_windows: usize,
    pub method: String,
}

impl EvalReport {
    pub fn with_method(mut self, method: impl Into<String>) -> Self {
        self.method = method.into();
        self
    }

    /// `key=value` lines prefixed with `prefix.`.
    pub fn to_key_values(&self, prefix: &str) -> String {
        format!(
            "{prefix}.rmse={}\n{prefix}.rmse_x={}\n{prefix}.rmse_y={}\n{prefix}.rmse_z={}\n{prefix}.rmse_horizontal={}\n{prefix}.windows={}\n",
            self.rmse, self.per_axis.x, self.per_axis.y, self.per_axis.z, self.horizontal, self.num_windows
        )
    }
}

/// Root mean squared Euclidean position error over aligned point pairs.
pub fn rmse(gt_points: &[Vector3], pred_points: &[Vector3]) -> Result<EvalReport> {
    if gt_points.len() != pred_points.len() {
        return Err(Error::shape(format!(
            "{} reference points but {} predictions",
            gt_points.len(),
            pred_points.len()
        )));
    }
    if gt_points.is_empty() {
        return Err(Error::invalid("rmse of empty sequences"));
    }
    let n = gt_points.len() as f64;
    let mut sq = Vector3::zeros();
    for (a, b) in gt_points.iter().zip(pred_points) {
        let e = a - b;
        sq += e.component_mul(&e);
    }
    let mean = sq / n;
    Ok(EvalReport {
        rmse: (mean.x + mean.y + mean.z).sqrt(),
        per_axis: mean.map(f64::sqrt),
        horizontal: (mean.x + mean.y).sqrt(),
        num_windows: gt_points.len(),
        method: String::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::window_series;
    use crate::ins::{EulerAngles, ImuSample};
    use crate::nn::{NetConfig, NetworkParams};
    use crate::trajectory::{generate_periodic_trajectory, inverse_mechanize, TrajectoryProfile};
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

    fn v(x: f64, y: f64, z: f64) -> Vector3 {
        Vector3::new(x, y, z)
    }

    #[test]
    fn integrate_examples() {
        let t = integrate_deltas(Vector3::zeros(), &[v(1.0, 0.0, 0.0), v(0.0, 1.0, 0.0)]).unwrap();
        assert_eq!(t.points, vec![v(1.0, 0.0, 0.0), v(1.0, 1.0, 0.0)]);
        let p0 = v(0.25, -2.0, 0.75);
        let t = integrate_deltas(p0, &[v(1.0, 0.0, 0.0), v(-1.0, 0.0, 0.0)]).unwrap();
        assert_eq!(t.points[1], p0);
        assert!(integrate_deltas(p0, &[v(f64::NAN, 0.0, 0.0)]).is_err());
    }

    #[test]
    fn quadnet_examples() {
        assert_eq!(quadnet_update(0.0, 0.0, 1.0, 0.0), (1.0, 0.0));
        let (x, y) = quadnet_update(0.0, 0.0, 1.0, FRAC_PI_2);
        assert!(x.abs() < 1e-15 && (y - 1.0).abs() < 1e-15);
        let (x, y) = quadnet_update(1.0, 1.0, 2f64.sqrt(), FRAC_PI_4);
        assert!((x - 2.0).abs() < 1e-15 && (y - 2.0).abs() < 1e-15);
    }

    #[test]
    fn rmse_examples() {
        let a = vec![v(1.0, 2.0, 3.0), v(-1.0, 0.5, 0.0)];
        assert_eq!(rmse(&a, &a).unwrap().rmse, 0.0);

        let r = rmse(&[Vector3::zeros()], &[v(3.0, 4.0, 0.0)]).unwrap();
        assert_eq!(r.rmse, 5.0);
        assert_eq!(r.horizontal, 5.0);
        assert_eq!(r.per_axis.z, 0.0);

        let r = rmse(&[Vector3::zeros(), Vector3::zeros()], &[Vector3::zeros(), v(0.0, 3.0, 4.0)]).unwrap();
        assert!((r.rmse - 12.5f64.sqrt()).abs() < 1e-15);
        assert!((r.rmse - 3.5355).abs() < 1e-4);

        assert!(rmse(&a, &a[..1]).is_err());
        assert!(rmse(&[], &[]).is_err());
    }

    #[test]
    fn gt_labels_telescope_to_zero_rmse() {
        let gt = generate_periodic_trajectory(&TrajectoryProfile::d5()).unwrap();
        let imu = inverse_mechanize(&gt, &ins::default_gravity()).unwrap();
        let spec = WindowSpec::new(100, 100).unwrap();
        let set = window_series(&imu, &gt, spec, "d5").unwrap();
        let pred = integrate_deltas(gt.positions()[0], &set.labels()).unwrap();
        let reference = reference_trajectory(&gt, spec).unwrap();
        assert_eq!(pred.len(), reference.len());
        assert_eq!(rmse(&reference.points, &pred.points).unwrap().rmse, 0.0);
    }

    /// A two-output model whose head ignores its input and emits constants.
    fn constant_model(n: usize, outputs: [f64; 2]) -> Model {
        let config = NetConfig {
            window_size: n,
            conv_channels: [2; 6],
            hidden: [2, 2],
            outputs: 2,
            ..NetConfig::single_head(n)
        };
        let mut params = NetworkParams::zeros(config).unwrap();
        params.head.bias.copy_from_slice(&outputs);
        Model { params, norm: None }
    }

    fn straight_level(len: usize, speed: f64) -> GroundTruthSeries {
        let ts: Vec<f64> = (0..len).map(|i| i as f64 / 100.0).collect();
        let pos = ts.iter().map(|&t| v(speed * t, 0.0, 0.7)).collect();
        GroundTruthSeries::new(ts, pos, vec![EulerAngles::level(0.0); len]).unwrap()
    }

    #[test]
    fn baseline_flies_along_x_when_level() {
        let gt = straight_level(1001, 0.2);
        let g = ins::default_gravity();
        let imu = inverse_mechanize(&gt, &g).unwrap();
        let spec = WindowSpec::new(100, 100).unwrap();
        let model = constant_model(100, [0.2, 0.0]);
        let init = gt.initial_state().unwrap();
        let traj = run_baseline(&imu, &model, &init, spec, &g).unwrap();
        assert_eq!(traj.len(), 10);
        for (k, p) in traj.points.iter().enumerate() {
            assert!((p.x - 0.2 * (k + 1) as f64).abs() < 1e-12);
            assert_eq!(p.y, 0.0);
            assert_eq!(p.z, 0.7);
        }
    }

    #[test]
    fn baseline_with_perfect_distance_tracks_constant_heading() {
        let gt = generate_periodic_trajectory(&TrajectoryProfile { heading: 0.6, ..TrajectoryProfile::d5() }).unwrap();
        let g = ins::default_gravity();
        let imu = inverse_mechanize(&gt, &g).unwrap();
        let spec = WindowSpec::new(100, 100).unwrap();
        let init = gt.initial_state().unwrap();
        let states = mechanize_series(&init, &imu, &g).unwrap();
        let reference = reference_trajectory(&gt, spec).unwrap();
        // perfect per-window distances and height changes, fed through the heading path
        let windows = window_series(&imu, &gt, spec, "t").unwrap();
        let mut p = init.position;
        for (k, w) in windows.samples.iter().take(10).enumerate() {
            let [d, dz] = baseline_target(&w.label);
            let psi = dcm_to_yaw(&states[w.span.unwrap().end].attitude).unwrap();
            (p.x, p.y) = quadnet_update(p.x, p.y, d, psi);
            p.z += dz;
            assert!((p - reference.points[k]).norm() < 1e-3);
        }
    }

    #[test]
    fn zero_distance_baseline_is_stationary() {
        let gt = generate_periodic_trajectory(&TrajectoryProfile { heading: 1.0, ..TrajectoryProfile::d5() }).unwrap();
        let g = ins::default_gravity();
        let imu = inverse_mechanize(&gt, &g).unwrap();
        let init = gt.initial_state().unwrap();
        let traj = run_baseline(&imu, &constant_model(50, [0.0, 0.0]), &init, WindowSpec::new(50, 50).unwrap(), &g).unwrap();
        assert!(traj.points.iter().all(|p| *p == init.position));
    }

    #[test]
    fn pure_ins_on_clean_imu_matches_truth() {
        let gt = generate_periodic_trajectory(&TrajectoryProfile::d5()).unwrap();
        let g = ins::default_gravity();
        let imu = inverse_mechanize(&gt, &g).unwrap();
        let spec = WindowSpec::new(100, 100).unwrap();
        let ins_traj = run_pure_ins(&imu, &gt.initial_state().unwrap(), spec, &g).unwrap();
        let reference = reference_trajectory(&gt, spec).unwrap();
        assert_eq!(ins_traj.times, reference.times);
        assert!(rmse(&reference.points, &ins_traj.points).unwrap().rmse < 1e-6);
    }

    #[test]
    fn chaining_rejects_overlap_and_mismatched_models() {
        let gt = straight_level(301, 0.1);
        let g = ins::default_gravity();
        let imu = inverse_mechanize(&gt, &g).unwrap();
        let init = gt.initial_state().unwrap();
        let model = constant_model(100, [0.1, 0.0]);
        assert!(run_baseline(&imu, &model, &init, WindowSpec::new(100, 50).unwrap(), &g).is_err());
        assert!(run_baseline(&imu, &model, &init, WindowSpec::new(50, 50).unwrap(), &g).is_err());
        assert!(run_quadposnet(&imu, &model, init.position, WindowSpec::new(100, 100).unwrap()).is_err());
    }

    #[test]
    fn trajectory_csv_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("traj.csv");
        let traj = integrate_deltas(v(0.0, 0.0, 0.7), &[v(0.18, 0.0, 0.01), v(0.18, 0.001, -0.02)])
            .unwrap()
            .with_times(vec![1.0, 2.0], 1.0)
            .unwrap();
        traj.write_csv(&path, 0.0).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("t,px,py,pz\n0,0,0,0.7\n"));
        assert_eq!(PredictedTrajectory::read_csv(&path).unwrap(), traj);
    }

    #[test]
    fn key_value_report() {
        let r = rmse(&[Vector3::zeros()], &[v(3.0, 4.0, 0.0)]).unwrap().with_method("single");
        let text = r.to_key_values("single");
        assert!(text.contains("single.rmse=5\n"));
        assert!(text.contains("single.windows=1\n"));
    }

    #[test]
    fn window_span_uses_sample_period() {
        let imu = ImuSeries::new((0..21).map(|i| ImuSample::new(i as f64 * 0.01, Vector3::zeros(), Vector3::zeros())).collect()).unwrap();
        let init = NavState::at_rest(Vector3::zeros(), ins::Dcm::identity(), 0.0);
        let traj = run_pure_ins(&imu, &init, WindowSpec::new(10, 10).unwrap(), &Vector3::zeros()).unwrap();
        assert!((traj.window_span - 0.1).abs() < 1e-12);
        assert_eq!(traj.times, vec![0.1, 0.2]);
    }

    fn arb_points(len: usize) -> impl Strategy<Value = Vec<Vector3>> {
        prop::collection::vec((-10.0..10.0f64, -10.0..10.0f64, -10.0..10.0f64).prop_map(|(x, y, z)| v(x, y, z)), len)
    }

    proptest! {
        #[test]
        fn quadnet_preserves_step_length(x in -1e3..1e3f64, y in -1e3..1e3f64, d in -10.0..10.0f64, psi in -10.0..10.0f64) {
            let (x2, y2) = quadnet_update(x, y, d, psi);
            prop_assert!(((x2 - x).hypot(y2 - y) - d.abs()).abs() < 1e-12);
        }

        #[test]
        fn rmse_is_symmetric_and_consistent((a, b) in (1usize..30).prop_flat_map(|n| (arb_points(n), arb_points(n)))) {
            let ab = rmse(&a, &b).unwrap();
            let ba = rmse(&b, &a).unwrap();
            prop_assert_eq!(ab.rmse, ba.rmse);
            let mean_sq = a.iter().zip(&b).map(|(p, q)| (p - q).norm_squared()).sum::<f64>() / a.len() as f64;
            prop_assert!((ab.rmse.powi(2) - mean_sq).abs() < 1e-9);
        }

        #[test]
        fn rmse_follows_joint_permutations((a, b) in (2usize..20).prop_flat_map(|n| (arb_points(n), arb_points(n))), shift in 1usize..19) {
            let k = shift % a.len();
            let (mut pa, mut pb) = (a.clone(), b.clone());
            pa.rotate_left(k);
            pb.rotate_left(k);
            prop_assert!((rmse(&pa, &pb).unwrap().rmse - rmse(&a, &b).unwrap().rmse).abs() < 1e-12);
        }
    }
}
