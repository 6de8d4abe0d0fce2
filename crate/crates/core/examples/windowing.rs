//! Cuts the D5 flight into windows, prints the first few labels and checks
//! that non-overlapping labels chain back to the ground-truth window ends.
//!
//! cargo run --release --example windowing [window_size] [stride]

use quadndr::dataset::{window_series, WindowSpec};
use quadndr::deadreckon::{integrate_deltas, reference_trajectory, rmse};
use quadndr::ins::default_gravity;
use quadndr::trajectory::{generate_periodic_trajectory, inverse_mechanize, TrajectoryProfile};

fn main() -> quadndr::Result<()> {
    let mut args = std::env::args().skip(1).map(|a| a.parse::<usize>().expect("positive integer"));
    let n = args.next().unwrap_or(100);
    let stride = args.next().unwrap_or(n / 2);
    let spec = WindowSpec::new(n, stride)?;

    let gt = generate_periodic_trajectory(&TrajectoryProfile::d5())?;
    let imu = inverse_mechanize(&gt, &default_gravity())?;
    let set = window_series(&imu, &gt, spec, "d5")?;
    println!("{} windows of {n} samples, stride {stride}", set.len());
    for s in set.samples.iter().take(5) {
        let (d, w) = (s.label, s.span.expect("windowed from a series"));
        println!("  samples {:>5}..{:<5} dp = ({:+.4}, {:+.4}, {:+.4})", w.start, w.end, d.x, d.y, d.z);
    }

    let chained = spec.non_overlapping();
    let labels = window_series(&imu, &gt, chained, "d5")?.labels();
    let pred = integrate_deltas(gt.positions()[0], &labels)?;
    let reference = reference_trajectory(&gt, chained)?;
    let report = rmse(&reference.points, &pred.points)?;
    println!("chained {} labels: RMSE against window ends {:e} m", labels.len(), report.rmse);
    Ok(())
}
