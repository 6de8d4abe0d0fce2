//! Overfits a single-head network to 32 windows of one noisy D5 flight and
//! prints the loss curve.
//!
//! cargo run --release --example train_overfit [dropout]

use std::time::Instant;

use quadndr::dataset::{normalize, window_series, WindowSpec};
use quadndr::ins::default_gravity;
use quadndr::nn::{train, Example, NetConfig, NetworkParams, TrainConfig};
use quadndr::trajectory::{corrupt_imu, generate_periodic_trajectory, inverse_mechanize, ImuErrorModel, TrajectoryProfile};

fn main() -> quadndr::Result<()> {
    let dropout: f64 = std::env::args().nth(1).map_or(0.2, |d| d.parse().expect("dropout rate"));
    let gt = generate_periodic_trajectory(&TrajectoryProfile::d5())?;
    let imu = corrupt_imu(&inverse_mechanize(&gt, &default_gravity())?, &ImuErrorModel::default().with_seed(5))?;
    let mut set = window_series(&imu, &gt, WindowSpec::indoor(), "d5")?;
    set.samples.truncate(32);
    let (set, _) = normalize(&set)?;
    let examples: Vec<Example<'_>> = set
        .samples
        .iter()
        .map(|s| Example { input: &s.input, target: s.label.as_slice().to_vec() })
        .collect();

    let config = NetConfig {
        conv_channels: [16, 16, 32, 32, 32, 32],
        hidden: [64, 32],
        dropout,
        ..NetConfig::single_head(100)
    };
    let mut params = NetworkParams::init(config, 0)?;
    let start = Instant::now();
    let history = train(&mut params, &examples, &TrainConfig { epochs: 500, strict: true, ..TrainConfig::default() })?;
    for (e, loss) in history.iter().enumerate().filter(|(e, _)| e % 50 == 0 || *e == history.len() - 1) {
        println!("epoch {:>3}: {loss:.4e}", e + 1);
    }
    let ratio = history[history.len() - 1] / history[0];
    println!("final / first = {ratio:.3e} after {:.1} s", start.elapsed().as_secs_f64());
    Ok(())
}
