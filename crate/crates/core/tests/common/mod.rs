//! Finite-difference gradient oracle shared by the integration tests.
//!
//! The relative error uses `max(|a|, |n|, FLOOR)` as denominator. Below the
//! floor the central difference is dominated by rounding (absolute noise
//! near `eps * |out| / step`, about 1e-10 here), so a pure ratio would measure
//! noise rather than the backward pass.

use quadndr::nn::{backward, Architecture, Example, NetConfig, NetworkParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const STEP: f64 = 1e-6;
pub const FLOOR: f64 = 1e-5;
pub const TOLERANCE: f64 = 1e-4;
/// Inputs whose smallest pre-activation is closer than this to zero are redrawn.
pub const KINK_MARGIN: f64 = 1e-4;

pub fn reduced(arch: Architecture) -> NetConfig {
    NetConfig {
        arch,
        window_size: 20,
        conv_channels: [4, 4, 6, 6, 8, 8],
        kernel_size: 3,
        hidden: [12, 8],
        outputs: 3,
        alpha: 0.01,
        dropout: 0.2,
    }
}

fn outputs(params: &NetworkParams, batch: &[Example<'_>], seeds: &[u64]) -> Vec<Vec<f64>> {
    batch
        .iter()
        .zip(seeds)
        .map(|(ex, &s)| params.forward_cached(ex.input, Some(s)).unwrap().output)
        .collect()
}

/// `L(θ+h) - L(θ-h)` written as a difference of squares to avoid cancellation.
fn loss_difference(plus: &[Vec<f64>], minus: &[Vec<f64>], batch: &[Example<'_>]) -> f64 {
    let mut total = 0.0;
    for ((p, m), ex) in plus.iter().zip(minus).zip(batch) {
        for ((a, b), t) in p.iter().zip(m).zip(&ex.target) {
            total += (a - b) * (a + b - 2.0 * t);
        }
    }
    total / batch.len() as f64
}

/// Worst relative error over every parameter of one random network.
pub fn max_relative_error(arch: Architecture, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let params = NetworkParams::init(reduced(arch), seed).unwrap();
    let seeds: Vec<u64> = (0..3).map(|i| seed * 10 + i).collect();
    let len = 6 * 20;
    let mut inputs: Vec<Vec<f64>> = Vec::new();
    for &s in &seeds {
        loop {
            let x: Vec<f64> = (0..len).map(|_| rng.random_range(-1.0..1.0)).collect();
            if params.forward_cached(&x, Some(s)).unwrap().min_abs_preactivation() > KINK_MARGIN {
                inputs.push(x);
                break;
            }
        }
    }
    let batch: Vec<Example<'_>> = inputs
        .iter()
        .map(|x| Example { input: x, target: (0..3).map(|_| rng.random_range(-0.5..0.5)).collect() })
        .collect();

    let analytic = backward(&params, &batch, Some(&seeds), true).unwrap().grads;
    let analytic: Vec<Vec<f64>> = analytic.blocks().iter().map(|b| b.values.to_vec()).collect();

    let mut worst: f64 = 0.0;
    let mut probe = params.clone();
    for (b, grads) in analytic.iter().enumerate() {
        for (i, &a) in grads.iter().enumerate() {
            let orig = probe.blocks_mut()[b][i];
            probe.blocks_mut()[b][i] = orig + STEP;
            let plus = outputs(&probe, &batch, &seeds);
            probe.blocks_mut()[b][i] = orig - STEP;
            let minus = outputs(&probe, &batch, &seeds);
            probe.blocks_mut()[b][i] = orig;
            let numeric = loss_difference(&plus, &minus, &batch) / (2.0 * STEP);
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(FLOOR);
            worst = worst.max(rel);
        }
    }
    worst
}
