//! Mechanizes clean and corrupted IMU data for the D5 flight and prints how
//! the free-inertial position error grows with time.
//!
//! cargo run --release --example mechanize_drift

use quadndr::ins::{default_gravity, mechanize_series};
use quadndr::trajectory::{corrupt_imu, generate_periodic_trajectory, inverse_mechanize, ImuErrorModel, TrajectoryProfile};

fn main() -> quadndr::Result<()> {
    let g = default_gravity();
    let gt = generate_periodic_trajectory(&TrajectoryProfile::d5())?;
    let init = gt.initial_state()?;
    let clean = inverse_mechanize(&gt, &g)?;
    let noisy = corrupt_imu(&clean, &ImuErrorModel::default().with_seed(1))?;
    let from_clean = mechanize_series(&init, &clean, &g)?;
    let from_noisy = mechanize_series(&init, &noisy, &g)?;

    println!("{:>7} {:>14} {:>14}", "t [s]", "clean err [m]", "noisy err [m]");
    for i in (0..gt.len()).step_by((gt.len() - 1) / 10) {
        let p = gt.positions()[i];
        println!(
            "{:>7.2} {:>14.3e} {:>14.3}",
            gt.timestamps()[i],
            (from_clean[i].position - p).norm(),
            (from_noisy[i].position - p).norm()
        );
    }
    Ok(())
}
