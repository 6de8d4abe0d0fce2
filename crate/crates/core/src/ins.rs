//! Strapdown inertial navigation primitives.
//!
//! The navigation frame is north-east-down (NED) and Earth rotation is
//! neglected, so the equations of motion reduce to
//!
//! ```text
//! p' = v
//! v' = T f + g
//! T' = T [w]x
//! ```
//!
//! where `T` is the body-to-navigation direction cosine matrix, `f` the
//! specific force and `w` the angular rate, both measured in the body frame.
//! [`mechanize_step`] integrates these with an exact attitude exponential,
//! explicit Euler on velocity and semi-implicit Euler on position.

use nalgebra::Matrix3;

use crate::error::{Error, Result};
use crate::trajectory::ImuSeries;

pub type Vector3 = nalgebra::Vector3<f64>;

/// Standard gravity, m/s².
pub const STANDARD_GRAVITY: f64 = 9.80665;

/// Gravity in NED: positive down.
pub fn default_gravity() -> Vector3 {
    Vector3::new(0.0, 0.0, STANDARD_GRAVITY)
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EulerAngles {
    pub roll: f64,
    pub pitch: f64,
    pub yaw: f64,
}

impl EulerAngles {
    pub fn new(roll: f64, pitch: f64, yaw: f64) -> Self {
        Self { roll, pitch, yaw }
    }

    pub fn level(yaw: f64) -> Self {
        Self { roll: 0.0, pitch: 0.0, yaw }
    }
}

/// Body-to-navigation direction cosine matrix.
///
/// Only constructed through functions that keep it orthonormal with
/// determinant +1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dcm(Matrix3<f64>);

impl Dcm {
    pub fn identity() -> Self {
        Dcm(Matrix3::identity())
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    /// Wraps an arbitrary matrix after one Gram–Schmidt pass.
    pub fn from_matrix(m: Matrix3<f64>) -> Result<Self> {
        if m.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("rotation matrix".into()));
        }
        orthonormalize(&m).map(Dcm)
    }

    pub fn transpose(&self) -> Matrix3<f64> {
        self.0.transpose()
    }

    /// Largest absolute entry of `TᵀT − I`.
    pub fn orthogonality_error(&self) -> f64 {
        (self.0.transpose() * self.0 - Matrix3::identity()).amax()
    }

    pub fn rotate(&self, v: &Vector3) -> Vector3 {
        self.0 * v
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NavState {
    pub position: Vector3,
    pub velocity: Vector3,
    pub attitude: Dcm,
    pub t: f64,
}

impl NavState {
    pub fn at_rest(position: Vector3, attitude: Dcm, t: f64) -> Self {
        Self { position, velocity: Vector3::zeros(), attitude, t }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImuSample {
    pub t: f64,
    /// Specific force, m/s², body frame.
    pub f: Vector3,
    /// Angular rate, rad/s, body frame.
    pub w: Vector3,
}

impl ImuSample {
    pub fn new(t: f64, f: Vector3, w: Vector3) -> Self {
        Self { t, f, w }
    }

    pub fn is_finite(&self) -> bool {
        self.t.is_finite() && all_finite(&self.f) && all_finite(&self.w)
    }
}

pub fn all_finite(v: &Vector3) -> bool {
    v.iter().all(|x| x.is_finite())
}

/// ZYX (yaw, pitch, roll) rotation from body to navigation frame.
pub fn euler_to_dcm(angles: EulerAngles) -> Result<Dcm> {
    let EulerAngles { roll, pitch, yaw } = angles;
    if !(roll.is_finite() && pitch.is_finite() && yaw.is_finite()) {
        return Err(Error::NonFinite("euler angles".into()));
    }
    if pitch.abs() >= std::f64::consts::FRAC_PI_2 {
        return Err(Error::invalid(format!(
            "pitch {pitch} rad is at or beyond the gimbal singularity"
        )));
    }
    let (sp, cp) = roll.sin_cos();
    let (st, ct) = pitch.sin_cos();
    let (sy, cy) = yaw.sin_cos();
    #[rustfmt::skip]
    let m = Matrix3::new(
        ct * cy, sp * st * cy - cp * sy, cp * st * cy + sp * sy,
        ct * sy, sp * st * sy + cp * cy, cp * st * sy - sp * cy,
        -st,     sp * ct,                cp * ct,
    );
    Ok(Dcm(m))
}

/// Heading of a body-to-nav rotation, in `[-π, π)`.
pub fn dcm_to_yaw(t: &Dcm) -> Result<f64> {
    let m = t.matrix();
    let (c, s) = (m[(0, 0)], m[(1, 0)]);
    if c.abs() + s.abs() < 1e-12 {
        return Err(Error::invalid("yaw undefined: pitch is at ±π/2"));
    }
    Ok(wrap_angle(s.atan2(c)))
}

/// Roll, pitch and yaw of a rotation; inverse of [`euler_to_dcm`] away from
/// the pitch singularity.
pub fn dcm_to_euler(t: &Dcm) -> Result<EulerAngles> {
    let m = t.matrix();
    let yaw = dcm_to_yaw(t)?;
    let pitch = (-m[(2, 0)]).clamp(-1.0, 1.0).asin();
    let roll = wrap_angle(m[(2, 1)].atan2(m[(2, 2)]));
    Ok(EulerAngles { roll, pitch, yaw })
}

/// Maps an angle into `[-π, π)`.
pub fn wrap_angle(a: f64) -> f64 {
    use std::f64::consts::{PI, TAU};
    let w = (a + PI).rem_euclid(TAU) - PI;
    if w >= PI {
        w - TAU
    } else {
        w
    }
}

/// Cross-product matrix: `skew(w) * x == w × x`.
pub fn skew(w: &Vector3) -> Matrix3<f64> {
    #[rustfmt::skip]
    let m = Matrix3::new(
        0.0, -w.z, w.y,
        w.z, 0.0, -w.x,
        -w.y, w.x, 0.0,
    );
    m
}

/// Rotation exponential `expm(skew(phi))` by the Rodrigues formula.
pub fn exp_so3(phi: &Vector3) -> Matrix3<f64> {
    let theta2 = phi.norm_squared();
    let k = skew(phi);
    let (a, b) = if theta2 < 1e-12 {
        // Taylor series of sin(x)/x and (1 - cos x)/x²
        (1.0 - theta2 / 6.0, 0.5 - theta2 / 24.0)
    } else {
        let theta = theta2.sqrt();
        (theta.sin() / theta, (1.0 - theta.cos()) / theta2)
    };
    Matrix3::identity() + k * a + k * k * b
}

/// Rotation vector of a rotation matrix; inverse of [`exp_so3`] for angles
/// below π.
pub fn log_so3(r: &Matrix3<f64>) -> Vector3 {
    let cos_theta = ((r.trace() - 1.0) * 0.5).clamp(-1.0, 1.0);
    let theta = cos_theta.acos();
    let vee = Vector3::new(
        r[(2, 1)] - r[(1, 2)],
        r[(0, 2)] - r[(2, 0)],
        r[(1, 0)] - r[(0, 1)],
    );
    if theta < 1e-6 {
        return vee * (0.5 + theta * theta / 12.0);
    }
    if std::f64::consts::PI - theta < 1e-6 {
        // axis from the symmetric part, sign fixed by vee
        let b = (r + Matrix3::identity()) * 0.5;
        let i = (0..3)
            .max_by(|&i, &j| b[(i, i)].total_cmp(&b[(j, j)]))
            .expect("three diagonal entries");
        let mut axis: Vector3 = b.column(i).into();
        axis /= axis.norm();
        if axis.dot(&vee) < 0.0 {
            axis = -axis;
        }
        return axis * theta;
    }
    vee * (theta / (2.0 * theta.sin()))
}

fn orthonormalize(m: &Matrix3<f64>) -> Result<Matrix3<f64>> {
    let c0 = m.column(0).into_owned();
    let n0 = c0.norm();
    if n0 < 1e-12 {
        return Err(Error::invalid("degenerate rotation matrix"));
    }
    let c0 = c0 / n0;
    let c1 = m.column(1) - c0 * c0.dot(&m.column(1));
    let n1 = c1.norm();
    if n1 < 1e-12 {
        return Err(Error::invalid("degenerate rotation matrix"));
    }
    let c1 = c1 / n1;
    let c2 = c0.cross(&c1);
    Ok(Matrix3::from_columns(&[c0, c1, c2]))
}

/// Advances the navigation state by one IMU sample.
pub fn mechanize_step(
    state: &NavState,
    sample: &ImuSample,
    dt: f64,
    gravity: &Vector3,
) -> Result<NavState> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::invalid(format!("time step must be positive, got {dt}")));
    }
    if !sample.is_finite() {
        return Err(Error::NonFinite(format!("imu sample at t={}", sample.t)));
    }
    let rotated = state.attitude.0 * exp_so3(&(sample.w * dt));
    let attitude = Dcm(orthonormalize(&rotated)?);
    let velocity = state.velocity + (attitude.0 * sample.f + gravity) * dt;
    let position = state.position + velocity * dt;
    Ok(NavState { position, velocity, attitude, t: state.t + dt })
}

/// Runs [`mechanize_step`] over a whole series.
///
/// Returns `init` followed by one state per sample, so `out[i]` is the state
/// at the timestamp of sample `i` and `out[len]` is one step past the last
/// sample. The step for sample `i` spans `t[i+1] - t[i]`; the last sample
/// reuses the previous spacing.
pub fn mechanize_series(init: &NavState, imu: &ImuSeries, gravity: &Vector3) -> Result<Vec<NavState>> {
    let samples = imu.samples();
    let mut out = Vec::with_capacity(samples.len() + 1);
    out.push(*init);
    let mut state = *init;
    for (i, sample) in samples.iter().enumerate() {
        let dt = if i + 1 < samples.len() {
            samples[i + 1].t - sample.t
        } else if i > 0 {
            sample.t - samples[i - 1].t
        } else {
            sample.t - init.t
        };
        if !(dt > 0.0) {
            return Err(Error::invalid(format!(
                "non-increasing imu timestamps near sample {i}"
            )));
        }
        state = mechanize_step(&state, sample, dt, gravity)?;
        out.push(state);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    #[test]
    fn zero_angles_give_identity() {
        let t = euler_to_dcm(EulerAngles::default()).unwrap();
        assert_eq!(*t.matrix(), Matrix3::identity());
    }

    #[test]
    fn pure_yaw_quarter_turn() {
        let t = euler_to_dcm(EulerAngles::level(FRAC_PI_2)).unwrap();
        let expected = Matrix3::new(0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0);
        assert_abs_diff_eq!(*t.matrix(), expected, epsilon = 1e-15);
    }

    #[test]
    fn roll_only_third_row() {
        let t = euler_to_dcm(EulerAngles::new(3.0, 0.0, 0.0)).unwrap();
        let m = t.matrix();
        assert_eq!(m[(2, 0)], 0.0);
        assert_abs_diff_eq!(m[(2, 1)], 3.0f64.sin(), epsilon = 1e-15);
        assert_abs_diff_eq!(m[(2, 2)], 3.0f64.cos(), epsilon = 1e-15);
    }

    #[test]
    fn euler_rejects_singular_and_nan() {
        assert!(euler_to_dcm(EulerAngles::new(0.0, FRAC_PI_2, 0.0)).is_err());
        assert!(euler_to_dcm(EulerAngles::new(0.0, -2.0, 0.0)).is_err());
        assert!(euler_to_dcm(EulerAngles::new(f64::NAN, 0.0, 0.0)).is_err());
    }

    #[test]
    fn yaw_examples() {
        assert_eq!(dcm_to_yaw(&Dcm::identity()).unwrap(), 0.0);
        let t = euler_to_dcm(EulerAngles::level(FRAC_PI_2)).unwrap();
        assert_abs_diff_eq!(dcm_to_yaw(&t).unwrap(), FRAC_PI_2, epsilon = 1e-15);
        let t = euler_to_dcm(EulerAngles::new(0.1, 0.2, 0.3)).unwrap();
        assert_abs_diff_eq!(dcm_to_yaw(&t).unwrap(), 0.3, epsilon = 1e-12);
    }

    #[test]
    fn yaw_is_half_open_at_pi() {
        let t = euler_to_dcm(EulerAngles::level(PI)).unwrap();
        assert_abs_diff_eq!(dcm_to_yaw(&t).unwrap(), -PI, epsilon = 1e-12);
    }

    #[test]
    fn yaw_degenerate_rejected() {
        // pitch = +90°: first column collapses to (0, 0, -1)
        let m = Matrix3::new(0.0, 0.0, 1.0, 0.0, 1.0, 0.0, -1.0, 0.0, 0.0);
        let t = Dcm::from_matrix(m).unwrap();
        assert!(dcm_to_yaw(&t).is_err());
    }

    #[test]
    fn skew_examples() {
        assert_eq!(skew(&Vector3::zeros()), Matrix3::zeros());
        let m = skew(&Vector3::new(1.0, 0.0, 0.0));
        let mut expected = Matrix3::zeros();
        expected[(1, 2)] = -1.0;
        expected[(2, 1)] = 1.0;
        assert_eq!(m, expected);
    }

    #[test]
    fn stationary_level_state_is_fixed_point() {
        let g = default_gravity();
        let state = NavState::at_rest(Vector3::new(1.0, 2.0, -3.0), Dcm::identity(), 0.0);
        let sample = ImuSample::new(0.0, Vector3::new(0.0, 0.0, -STANDARD_GRAVITY), Vector3::zeros());
        let next = mechanize_step(&state, &sample, 0.01, &g).unwrap();
        assert_eq!(next.position, state.position);
        assert_eq!(next.velocity, state.velocity);
    }

    #[test]
    fn constant_forward_push() {
        let g = default_gravity();
        let state = NavState::at_rest(Vector3::zeros(), Dcm::identity(), 0.0);
        let sample = ImuSample::new(0.0, Vector3::new(1.0, 0.0, -STANDARD_GRAVITY), Vector3::zeros());
        let next = mechanize_step(&state, &sample, 0.1, &g).unwrap();
        assert_abs_diff_eq!(next.velocity, Vector3::new(0.1, 0.0, 0.0), epsilon = 1e-15);
        assert_abs_diff_eq!(next.position, Vector3::new(0.01, 0.0, 0.0), epsilon = 1e-15);
        assert_abs_diff_eq!(next.t, 0.1);
    }

    #[test]
    fn one_second_yaw_rate() {
        let g = default_gravity();
        let state = NavState::at_rest(Vector3::zeros(), Dcm::identity(), 0.0);
        let sample = ImuSample::new(
            0.0,
            Vector3::new(0.0, 0.0, -STANDARD_GRAVITY),
            Vector3::new(0.0, 0.0, FRAC_PI_2),
        );
        let next = mechanize_step(&state, &sample, 1.0, &g).unwrap();
        assert_abs_diff_eq!(dcm_to_yaw(&next.attitude).unwrap(), FRAC_PI_2, epsilon = 1e-9);
    }

    #[test]
    fn step_rejects_bad_dt_and_nan() {
        let g = default_gravity();
        let state = NavState::at_rest(Vector3::zeros(), Dcm::identity(), 0.0);
        let ok = ImuSample::new(0.0, Vector3::zeros(), Vector3::zeros());
        assert!(mechanize_step(&state, &ok, 0.0, &g).is_err());
        assert!(mechanize_step(&state, &ok, -0.1, &g).is_err());
        let bad = ImuSample::new(0.0, Vector3::new(f64::NAN, 0.0, 0.0), Vector3::zeros());
        assert!(mechanize_step(&state, &bad, 0.1, &g).is_err());
    }

    #[test]
    fn empty_series_returns_init() {
        let init = NavState::at_rest(Vector3::new(1.0, 0.0, 0.0), Dcm::identity(), 0.0);
        let imu = ImuSeries::new(Vec::new()).unwrap();
        let out = mechanize_series(&init, &imu, &default_gravity()).unwrap();
        assert_eq!(out, vec![init]);
    }

    #[test]
    fn hover_ten_seconds() {
        let samples = (0..1000)
            .map(|i| {
                ImuSample::new(i as f64 * 0.01, Vector3::new(0.0, 0.0, -STANDARD_GRAVITY), Vector3::zeros())
            })
            .collect();
        let imu = ImuSeries::new(samples).unwrap();
        let init = NavState::at_rest(Vector3::zeros(), Dcm::identity(), 0.0);
        let out = mechanize_series(&init, &imu, &default_gravity()).unwrap();
        assert_eq!(out.len(), 1001);
        assert!(out.last().unwrap().position.norm() < 1e-6);
    }

    #[test]
    fn log_exp_roundtrip_near_pi() {
        let phi = Vector3::new(0.0, 0.0, PI - 1e-8);
        let back = log_so3(&exp_so3(&phi));
        assert_abs_diff_eq!(back, phi, epsilon = 1e-6);
    }

    fn angles() -> impl Strategy<Value = EulerAngles> {
        (-PI..PI, -1.55f64..1.55, -PI..PI).prop_map(|(r, p, y)| EulerAngles::new(r, p, y))
    }

    proptest! {
        #[test]
        fn yaw_roundtrip(a in angles()) {
            let t = euler_to_dcm(a).unwrap();
            let yaw = dcm_to_yaw(&t).unwrap();
            prop_assert!(wrap_angle(yaw - a.yaw).abs() < 1e-10);
        }

        #[test]
        fn euler_roundtrip(a in angles()) {
            let back = dcm_to_euler(&euler_to_dcm(a).unwrap()).unwrap();
            prop_assert!((back.pitch - a.pitch).abs() < 1e-9);
            prop_assert!(wrap_angle(back.roll - a.roll).abs() < 1e-9);
        }

        #[test]
        fn constructed_dcm_is_orthonormal(a in angles()) {
            let t = euler_to_dcm(a).unwrap();
            prop_assert!(t.orthogonality_error() < 1e-9);
            prop_assert!((t.matrix().determinant() - 1.0).abs() < 1e-9);
        }

        #[test]
        fn skew_is_antisymmetric(x in -10.0f64..10.0, y in -10.0f64..10.0, z in -10.0f64..10.0) {
            let w = Vector3::new(x, y, z);
            let m = skew(&w);
            prop_assert_eq!(m.transpose(), -m);
            prop_assert_eq!(m * w, Vector3::zeros());
        }

        #[test]
        fn gravity_cancelling_force_is_identity_on_pv(a in angles(), vx in -2.0f64..2.0) {
            let g = default_gravity();
            let att = euler_to_dcm(a).unwrap();
            let state = NavState {
                position: Vector3::new(0.3, -0.2, 1.0),
                velocity: Vector3::new(vx, 0.0, 0.0),
                attitude: att,
                t: 0.0,
            };
            let f = -(att.transpose() * g);
            let next = mechanize_step(&state, &ImuSample::new(0.0, f, Vector3::zeros()), 0.01, &g).unwrap();
            prop_assert!((next.velocity - state.velocity).amax() < 1e-14);
            prop_assert!((next.position - (state.position + state.velocity * 0.01)).amax() < 1e-14);
        }

        #[test]
        fn mechanized_attitude_stays_orthonormal(
            wx in -3.0f64..3.0, wy in -3.0f64..3.0, wz in -3.0f64..3.0, steps in 1usize..200,
        ) {
            let g = default_gravity();
            let mut state = NavState::at_rest(Vector3::zeros(), Dcm::identity(), 0.0);
            let s = ImuSample::new(0.0, Vector3::zeros(), Vector3::new(wx, wy, wz));
            for _ in 0..steps {
                state = mechanize_step(&state, &s, 0.01, &g).unwrap();
            }
            prop_assert!(state.attitude.orthogonality_error() < 1e-9);
        }
    }
}
