//! Periodic ground-truth trajectories and the IMU streams that fly them.
//!
//! The vehicle advances at constant horizontal speed along a fixed heading
//! while its `z` coordinate follows a sinusoid in horizontal progress. IMU
//! readings are obtained by discretely inverting the strapdown integrator in
//! [`crate::ins`], so mechanizing a clean series reproduces the trajectory to
//! rounding error.

use std::f64::consts::TAU;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::csvio;
use crate::error::{Error, Result};
use crate::ins::{self, Dcm, EulerAngles, ImuSample, NavState, Vector3};

pub const GT_HEADER: [&str; 7] = ["t", "px", "py", "pz", "roll", "pitch", "yaw"];
pub const IMU_HEADER: [&str; 7] = ["t", "fx", "fy", "fz", "wx", "wy", "wz"];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryProfile {
    /// Starting `z` and centre line of the oscillation, m.
    pub hover_height: f64,
    pub amplitude: f64,
    /// Horizontal distance between consecutive peaks, m.
    pub p2p_distance: f64,
    /// Horizontal distance covered, m.
    pub total_span: f64,
    /// Constant horizontal speed, m/s.
    pub speed: f64,
    pub sample_rate: f64,
    /// Flight azimuth, rad.
    pub heading: f64,
}

impl TrajectoryProfile {
    /// Indoor profile with a 0.7 m hover, 0.1 m amplitude and 0.7 m P2P.
    pub fn d5() -> Self {
        Self {
            hover_height: 0.7,
            amplitude: 0.1,
            p2p_distance: 0.7,
            total_span: 3.6,
            speed: 0.18,
            sample_rate: 100.0,
            heading: 0.0,
        }
    }

    /// Indoor profile with a 0.5 m hover, 0.65 m amplitude and 0.9 m P2P.
    pub fn d4() -> Self {
        Self { hover_height: 0.5, amplitude: 0.65, p2p_distance: 0.9, ..Self::d5() }
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("hover_height", self.hover_height),
            ("amplitude", self.amplitude),
            ("p2p_distance", self.p2p_distance),
            ("total_span", self.total_span),
            ("speed", self.speed),
            ("sample_rate", self.sample_rate),
            ("heading", self.heading),
        ];
        if let Some((name, _)) = fields.iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite(format!("trajectory profile field {name}")));
        }
        if self.amplitude < 0.0 {
            return Err(Error::invalid("amplitude must be non-negative"));
        }
        for (name, v) in &fields[2..6] {
            if *v <= 0.0 {
                return Err(Error::invalid(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    /// Position at time `t` after the start.
    pub fn position_at(&self, t: f64) -> Vector3 {
        let (sh, ch) = self.heading.sin_cos();
        let s = self.speed * t;
        let z = self.hover_height + self.amplitude * (TAU * s / self.p2p_distance).sin();
        Vector3::new(s * ch, s * sh, z)
    }

    /// Number of samples the generated trajectory will contain.
    pub fn sample_count(&self) -> usize {
        let steps = self.total_span / self.speed * self.sample_rate;
        // absorb rounding such as 3.6 / 0.18 = 19.999999999999996
        (steps + 1e-9 * steps.max(1.0)).floor() as usize + 1
    }
}

impl Default for TrajectoryProfile {
    fn default() -> Self {
        Self::d5()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthSeries {
    timestamps: Vec<f64>,
    positions: Vec<Vector3>,
    attitudes: Vec<EulerAngles>,
}

impl GroundTruthSeries {
    pub fn new(timestamps: Vec<f64>, positions: Vec<Vector3>, attitudes: Vec<EulerAngles>) -> Result<Self> {
        if timestamps.len() != positions.len() || timestamps.len() != attitudes.len() {
            return Err(Error::shape(format!(
                "ground truth columns differ in length: {} timestamps, {} positions, {} attitudes",
                timestamps.len(),
                positions.len(),
                attitudes.len()
            )));
        }
        check_increasing(&timestamps)?;
        if positions.iter().any(|p| !ins::all_finite(p)) {
            return Err(Error::NonFinite("ground truth positions".into()));
        }
        Ok(Self { timestamps, positions, attitudes })
    }

    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    pub fn timestamps(&self) -> &[f64] {
        &self.timestamps
    }

    pub fn positions(&self) -> &[Vector3] {
        &self.positions
    }

    pub fn attitudes(&self) -> &[EulerAngles] {
        &self.attitudes
    }

    /// Navigation state at the first sample, with the velocity chosen so that
    /// [`ins::mechanize_series`] over [`inverse_mechanize`] output retraces
    /// the stored positions.
    pub fn initial_state(&self) -> Result<NavState> {
        if self.len() < 3 {
            return Err(Error::invalid("at least 3 ground-truth samples are required"));
        }
        let p = &self.positions;
        let t = &self.timestamps;
        let dt0 = t[1] - t[0];
        let accel = second_difference(p, t, 1);
        let velocity = (p[1] - p[0]) / dt0 - accel * dt0;
        Ok(NavState {
            position: p[0],
            velocity,
            attitude: ins::euler_to_dcm(self.attitudes[0])?,
            t: t[0],
        })
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let rows = (0..self.len()).map(|i| {
            let (p, a) = (self.positions[i], self.attitudes[i]);
            vec![self.timestamps[i], p.x, p.y, p.z, a.roll, a.pitch, a.yaw]
        });
        csvio::write_numeric_file(path, &GT_HEADER, rows)
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let rows = csvio::read_numeric_file(path, &GT_HEADER)?;
        let mut t = Vec::with_capacity(rows.len());
        let mut p = Vec::with_capacity(rows.len());
        let mut a = Vec::with_capacity(rows.len());
        for row in rows {
            if row.len() != 7 {
                return Err(Error::format(path, "expected 7 columns"));
            }
            t.push(row[0]);
            p.push(Vector3::new(row[1], row[2], row[3]));
            a.push(EulerAngles::new(row[4], row[5], row[6]));
        }
        Self::new(t, p, a).map_err(|e| Error::format(path, e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ImuSeries {
    samples: Vec<ImuSample>,
}

impl ImuSeries {
    pub fn new(samples: Vec<ImuSample>) -> Result<Self> {
        let ts: Vec<f64> = samples.iter().map(|s| s.t).collect();
        check_increasing(&ts)?;
        if let Some(s) = samples.iter().find(|s| !s.is_finite()) {
            return Err(Error::NonFinite(format!("imu sample at t={}", s.t)));
        }
        Ok(Self { samples })
    }

    pub fn samples(&self) -> &[ImuSample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let rows = self
            .samples
            .iter()
            .map(|s| vec![s.t, s.f.x, s.f.y, s.f.z, s.w.x, s.w.y, s.w.z]);
        csvio::write_numeric_file(path, &IMU_HEADER, rows)
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let rows = csvio::read_numeric_file(path, &IMU_HEADER)?;
        let samples = rows
            .into_iter()
            .map(|row| {
                if row.len() != 7 {
                    return Err(Error::format(path, "expected 7 columns"));
                }
                Ok(ImuSample::new(
                    row[0],
                    Vector3::new(row[1], row[2], row[3]),
                    Vector3::new(row[4], row[5], row[6]),
                ))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(samples).map_err(|e| Error::format(path, e.to_string()))
    }
}

fn check_increasing(ts: &[f64]) -> Result<()> {
    if let Some(t) = ts.iter().find(|t| !t.is_finite()) {
        return Err(Error::NonFinite(format!("timestamp {t}")));
    }
    if let Some(i) = ts.windows(2).position(|w| w[1] <= w[0]) {
        return Err(Error::invalid(format!(
            "timestamps must be strictly increasing (index {})",
            i + 1
        )));
    }
    Ok(())
}

/// Additive sensor errors: constant biases plus white Gaussian noise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImuErrorModel {
    pub accel_bias: Vector3,
    pub gyro_bias: Vector3,
    pub accel_noise_std: f64,
    pub gyro_noise_std: f64,
    pub seed: u64,
}

impl ImuErrorModel {
    pub fn none() -> Self {
        Self {
            accel_bias: Vector3::zeros(),
            gyro_bias: Vector3::zeros(),
            accel_noise_std: 0.0,
            gyro_noise_std: 0.0,
            seed: 0,
        }
    }

    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.accel_noise_std >= 0.0 && self.gyro_noise_std >= 0.0) {
            return Err(Error::invalid("noise standard deviations must be non-negative"));
        }
        if !(ins::all_finite(&self.accel_bias) && ins::all_finite(&self.gyro_bias)) {
            return Err(Error::NonFinite("imu biases".into()));
        }
        Ok(())
    }
}

impl Default for ImuErrorModel {
    fn default() -> Self {
        Self { accel_noise_std: 0.05, gyro_noise_std: 0.002, ..Self::none() }
    }
}

/// Samples a level, constant-heading sinusoidal flight.
pub fn generate_periodic_trajectory(profile: &TrajectoryProfile) -> Result<GroundTruthSeries> {
    profile.validate()?;
    let n = profile.sample_count();
    let mut timestamps = Vec::with_capacity(n);
    let mut positions = Vec::with_capacity(n);
    for i in 0..n {
        let t = i as f64 / profile.sample_rate;
        timestamps.push(t);
        positions.push(profile.position_at(t));
    }
    let attitudes = vec![EulerAngles::level(ins::wrap_angle(profile.heading)); n];
    GroundTruthSeries::new(timestamps, positions, attitudes)
}

/// Acceleration at sample `k` consistent with the semi-implicit integrator:
/// the change between backward differences either side of `k`.
fn second_difference(p: &[Vector3], t: &[f64], k: usize) -> Vector3 {
    let dt_prev = t[k] - t[k - 1];
    let dt_next = t[k + 1] - t[k];
    ((p[k + 1] - p[k]) / dt_next - (p[k] - p[k - 1]) / dt_prev) / dt_next
}

/// Specific force and angular rate that, mechanized from
/// [`GroundTruthSeries::initial_state`], reproduce the trajectory.
pub fn inverse_mechanize(gt: &GroundTruthSeries, gravity: &Vector3) -> Result<ImuSeries> {
    let n = gt.len();
    if n < 3 {
        return Err(Error::invalid(format!(
            "inverse mechanization needs at least 3 samples, got {n}"
        )));
    }
    let t = gt.timestamps();
    let p = gt.positions();
    let dcms = gt
        .attitudes()
        .iter()
        .map(|a| ins::euler_to_dcm(*a))
        .collect::<Result<Vec<Dcm>>>()?;

    let mut rates = Vec::with_capacity(n);
    for k in 0..n - 1 {
        let rel = dcms[k].transpose() * dcms[k + 1].matrix();
        rates.push(ins::log_so3(&rel) / (t[k + 1] - t[k]));
    }
    rates.push(rates[n - 2]);

    let mut samples = Vec::with_capacity(n);
    for k in 0..n {
        // one-sided at the ends
        let accel = second_difference(p, t, k.clamp(1, n - 2));
        // mechanization applies the force after rotating to the end-of-step attitude
        let end_attitude = if k + 1 < n {
            dcms[k + 1].transpose()
        } else {
            let dt = t[k] - t[k - 1];
            (dcms[k].matrix() * ins::exp_so3(&(rates[k] * dt))).transpose()
        };
        let f = end_attitude * (accel - gravity);
        samples.push(ImuSample::new(t[k], f, rates[k]));
    }
    ImuSeries::new(samples)
}

/// Adds biases and seeded white noise. Zero terms are skipped so the
/// all-zero model returns its input bit for bit.
pub fn corrupt_imu(imu: &ImuSeries, model: &ImuErrorModel) -> Result<ImuSeries> {
    model.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(model.seed);
    let accel = Normal::new(0.0, model.accel_noise_std).map_err(|e| Error::invalid(e.to_string()))?;
    let gyro = Normal::new(0.0, model.gyro_noise_std).map_err(|e| Error::invalid(e.to_string()))?;

    let perturb = |v: &mut Vector3, bias: &Vector3, std: f64, dist: &Normal<f64>, rng: &mut ChaCha8Rng| {
        for i in 0..3 {
            if bias[i] != 0.0 {
                v[i] += bias[i];
            }
            if std > 0.0 {
                v[i] += dist.sample(rng);
            }
        }
    };

    let samples = imu
        .samples()
        .iter()
        .map(|s| {
            let mut out = *s;
            perturb(&mut out.f, &model.accel_bias, model.accel_noise_std, &accel, &mut rng);
            perturb(&mut out.w, &model.gyro_bias, model.gyro_noise_std, &gyro, &mut rng);
            out
        })
        .collect();
    Ok(ImuSeries { samples })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ins::{default_gravity, mechanize_series, STANDARD_GRAVITY};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn d5_starts_at_hover_height() {
        let gt = generate_periodic_trajectory(&TrajectoryProfile::d5()).unwrap();
        assert_eq!(gt.positions()[0], Vector3::new(0.0, 0.0, 0.7));
    }

    #[test]
    fn d5_quarter_period_by_progress() {
        let profile = TrajectoryProfile::d5();
        let p = profile.position_at(0.175 / profile.speed);
        assert_abs_diff_eq!(p.x, 0.175, epsilon = 1e-15);
        assert_abs_diff_eq!(p.z, 0.8, epsilon = 1e-12);
    }

    #[test]
    fn quarter_period_on_sample_grid() {
        // sample rate chosen so 0.175 m of progress falls on a sample
        let profile = TrajectoryProfile { speed: 0.175, ..TrajectoryProfile::d5() };
        let gt = generate_periodic_trajectory(&profile).unwrap();
        let k = 100;
        assert_abs_diff_eq!(gt.positions()[k].x, 0.175, epsilon = 1e-15);
        assert_abs_diff_eq!(gt.positions()[k].z, 0.8, epsilon = 1e-12);
    }

    #[test]
    fn zero_amplitude_is_flat() {
        let profile = TrajectoryProfile { amplitude: 0.0, ..TrajectoryProfile::d5() };
        let gt = generate_periodic_trajectory(&profile).unwrap();
        assert!(gt.positions().iter().all(|p| p.z == 0.7));
    }

    #[test]
    fn d5_length() {
        let gt = generate_periodic_trajectory(&TrajectoryProfile::d5()).unwrap();
        assert_eq!(gt.len(), 2001);
    }

    #[test]
    fn invalid_profiles_rejected() {
        let base = TrajectoryProfile::d5();
        for bad in [
            TrajectoryProfile { amplitude: -0.1, ..base },
            TrajectoryProfile { p2p_distance: 0.0, ..base },
            TrajectoryProfile { total_span: -1.0, ..base },
            TrajectoryProfile { speed: 0.0, ..base },
            TrajectoryProfile { sample_rate: 0.0, ..base },
            TrajectoryProfile { hover_height: f64::NAN, ..base },
        ] {
            assert!(generate_periodic_trajectory(&bad).is_err(), "{bad:?}");
        }
    }

    fn hover(n: usize) -> GroundTruthSeries {
        GroundTruthSeries::new(
            (0..n).map(|i| i as f64 * 0.01).collect(),
            vec![Vector3::new(0.0, 0.0, 0.7); n],
            vec![EulerAngles::default(); n],
        )
        .unwrap()
    }

    #[test]
    fn hover_imu_is_gravity_only() {
        let imu = inverse_mechanize(&hover(50), &default_gravity()).unwrap();
        for s in imu.samples() {
            assert_eq!(s.f, Vector3::new(0.0, 0.0, -STANDARD_GRAVITY));
            assert_eq!(s.w, Vector3::zeros());
        }
    }

    #[test]
    fn constant_acceleration_force() {
        let n = 50;
        let ts: Vec<f64> = (0..n).map(|i| i as f64 * 0.01).collect();
        let ps = ts.iter().map(|t| Vector3::new(0.5 * t * t, 0.0, 0.0)).collect();
        let gt = GroundTruthSeries::new(ts, ps, vec![EulerAngles::default(); n]).unwrap();
        let imu = inverse_mechanize(&gt, &default_gravity()).unwrap();
        for s in imu.samples() {
            assert_abs_diff_eq!(s.f, Vector3::new(1.0, 0.0, -STANDARD_GRAVITY), epsilon = 1e-9);
        }
    }

    #[test]
    fn inverse_mechanize_needs_three_samples() {
        assert!(inverse_mechanize(&hover(2), &default_gravity()).is_err());
    }

    #[test]
    fn roundtrip_with_turning_attitude() {
        let n = 1001;
        let ts: Vec<f64> = (0..n).map(|i| i as f64 * 0.01).collect();
        let ps = ts
            .iter()
            .map(|t| Vector3::new(0.3 * t, 0.2 * (0.5 * t).sin(), 0.7 + 0.1 * (1.3 * t).sin()))
            .collect();
        let atts = ts
            .iter()
            .map(|t| EulerAngles::new(0.05 * (0.7 * t).sin(), 0.03 * (0.4 * t).cos(), 0.2 * t - 1.0))
            .collect();
        let gt = GroundTruthSeries::new(ts, ps, atts).unwrap();
        let g = default_gravity();
        let imu = inverse_mechanize(&gt, &g).unwrap();
        let states = mechanize_series(&gt.initial_state().unwrap(), &imu, &g).unwrap();
        let err = states[..n]
            .iter()
            .zip(gt.positions())
            .map(|(s, p)| (s.position - p).norm())
            .fold(0.0, f64::max);
        assert!(err < 1e-3, "max roundtrip error {err}");
    }

    #[test]
    fn zero_error_model_is_identity() {
        let gt = generate_periodic_trajectory(&TrajectoryProfile::d5()).unwrap();
        let imu = inverse_mechanize(&gt, &default_gravity()).unwrap();
        let out = corrupt_imu(&imu, &ImuErrorModel::none()).unwrap();
        for (a, b) in imu.samples().iter().zip(out.samples()) {
            for i in 0..3 {
                assert_eq!(a.f[i].to_bits(), b.f[i].to_bits());
                assert_eq!(a.w[i].to_bits(), b.w[i].to_bits());
            }
        }
    }

    #[test]
    fn bias_only_shifts_exactly() {
        let imu = inverse_mechanize(&hover(20), &default_gravity()).unwrap();
        let model = ImuErrorModel { accel_bias: Vector3::new(0.1, 0.0, 0.0), ..ImuErrorModel::none() };
        let out = corrupt_imu(&imu, &model).unwrap();
        for (a, b) in imu.samples().iter().zip(out.samples()) {
            assert_eq!(b.f.x, a.f.x + 0.1);
            assert_eq!(b.f.y, a.f.y);
            assert_eq!(b.w, a.w);
        }
    }

    #[test]
    fn noise_is_seed_deterministic() {
        let imu = inverse_mechanize(&hover(100), &default_gravity()).unwrap();
        let model = ImuErrorModel::default().with_seed(11);
        let a = corrupt_imu(&imu, &model).unwrap();
        let b = corrupt_imu(&imu, &model).unwrap();
        let c = corrupt_imu(&imu, &model.with_seed(12)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn negative_noise_rejected() {
        let imu = inverse_mechanize(&hover(10), &default_gravity()).unwrap();
        let model = ImuErrorModel { gyro_noise_std: -1.0, ..ImuErrorModel::none() };
        assert!(corrupt_imu(&imu, &model).is_err());
    }

    #[test]
    fn csv_roundtrip_and_header_check() {
        let dir = tempfile::tempdir().unwrap();
        let gt = generate_periodic_trajectory(&TrajectoryProfile { total_span: 0.2, ..TrajectoryProfile::d5() }).unwrap();
        let imu = inverse_mechanize(&gt, &default_gravity()).unwrap();
        let gp = dir.path().join("gt.csv");
        let ip = dir.path().join("imu.csv");
        gt.write_csv(&gp).unwrap();
        imu.write_csv(&ip).unwrap();
        assert_eq!(GroundTruthSeries::read_csv(&gp).unwrap(), gt);
        assert_eq!(ImuSeries::read_csv(&ip).unwrap(), imu);
        // swapped file types: headers differ
        assert!(GroundTruthSeries::read_csv(&ip).is_err());
        assert!(ImuSeries::read_csv(&gp).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn length_and_excursion(
            amplitude in 0.0f64..0.7,
            p2p in 0.3f64..1.5,
            span in 0.5f64..4.0,
            speed in 0.1f64..0.5,
            rate in prop::sample::select(vec![50.0, 100.0, 120.0]),
        ) {
            let profile = TrajectoryProfile {
                hover_height: 0.7, amplitude, p2p_distance: p2p, total_span: span, speed, sample_rate: rate, heading: 0.3,
            };
            let gt = generate_periodic_trajectory(&profile).unwrap();
            prop_assert_eq!(gt.len(), (span / speed * rate + 1e-9).floor() as usize + 1);
            // excursion check only when at least one full period is covered
            if span >= p2p {
                let zs = gt.positions().iter().map(|p| p.z);
                let range = zs.clone().fold(f64::MIN, f64::max) - zs.fold(f64::MAX, f64::min);
                let per_sample = amplitude * TAU * speed / (p2p * rate);
                prop_assert!((range - 2.0 * amplitude).abs() <= per_sample + 1e-12);
            }
        }

        #[test]
        fn noise_free_roundtrip(amplitude in 0.0f64..0.7, p2p in 0.5f64..1.2, heading in -3.0f64..3.0) {
            let profile = TrajectoryProfile { amplitude, p2p_distance: p2p, heading, total_span: 1.8, ..TrajectoryProfile::d5() };
            let gt = generate_periodic_trajectory(&profile).unwrap();
            let g = default_gravity();
            let imu = inverse_mechanize(&gt, &g).unwrap();
            let states = mechanize_series(&gt.initial_state().unwrap(), &imu, &g).unwrap();
            let last = gt.len() - 1;
            prop_assert!((states[last].position - gt.positions()[last]).norm() < 1e-3);
        }
    }
}
