//! Generates the D5 flight, synthesizes clean and corrupted IMU data and
//! writes all three series as CSV.
//!
//! cargo run --release --example simulate_d5 [out_dir]

use std::path::PathBuf;

use quadndr::ins::default_gravity;
use quadndr::trajectory::{corrupt_imu, generate_periodic_trajectory, inverse_mechanize, ImuErrorModel, TrajectoryProfile};

fn main() -> quadndr::Result<()> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "out/d5".into()));
    std::fs::create_dir_all(&dir)?;

    let profile = TrajectoryProfile::d5();
    let gt = generate_periodic_trajectory(&profile)?;
    let clean = inverse_mechanize(&gt, &default_gravity())?;
    let noisy = corrupt_imu(&clean, &ImuErrorModel::default().with_seed(1))?;

    let last = gt.len() - 1;
    println!(
        "{} samples over {:.1} s, start {:?}, end {:?}",
        gt.len(),
        gt.timestamps()[last],
        gt.positions()[0].as_slice(),
        gt.positions()[last].as_slice()
    );
    let z: Vec<f64> = gt.positions().iter().map(|p| p.z).collect();
    let (lo, hi) = z.iter().fold((f64::MAX, f64::MIN), |(l, h), &v| (l.min(v), h.max(v)));
    println!("height range [{lo:.3}, {hi:.3}] m");

    gt.write_csv(&dir.join("gt.csv"))?;
    clean.write_csv(&dir.join("imu_clean.csv"))?;
    noisy.write_csv(&dir.join("imu_noisy.csv"))?;
    println!("wrote gt.csv, imu_clean.csv, imu_noisy.csv to {}", dir.display());
    Ok(())
}
