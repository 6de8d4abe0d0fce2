//! Loss, batch gradients and the mini-batch training loop.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::adam::{adam_step, AdamConfig, AdamState};
use super::network::{mix_seed, NetworkParams};
use crate::error::{Error, Result};
use crate::ins::Vector3;

/// Samples per work unit when reductions must run in a fixed order.
const STRICT_CHUNK: usize = 8;

/// One training pair: a `6 × n` window and its regression target.
#[derive(Debug, Clone, PartialEq)]
pub struct Example<'a> {
    pub input: &'a [f64],
    pub target: Vec<f64>,
}

fn squared_error(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Mean over samples of the squared Euclidean error.
pub fn mse_loss(predictions: &[Vector3], targets: &[Vector3]) -> Result<f64> {
    if predictions.is_empty() || predictions.len() != targets.len() {
        return Err(Error::shape(format!(
            "mse needs equal non-empty sequences, got {} and {}",
            predictions.len(),
            targets.len()
        )));
    }
    let total: f64 = predictions.iter().zip(targets).map(|(p, t)| (p - t).norm_squared()).sum();
    Ok(total / predictions.len() as f64)
}

/// Loss and gradient of one batch.
#[derive(Debug, Clone)]
pub struct BatchGradient {
    pub loss: f64,
    pub grads: NetworkParams,
}

/// Gradient of the batch MSE with respect to every parameter.
///
/// `dropout_seeds`, when given, holds one seed per example and switches the
/// forward pass to training mode. With `strict` the per-sample gradients are
/// summed in a fixed order, independent of how work is scheduled.
pub fn backward(
    params: &NetworkParams,
    batch: &[Example<'_>],
    dropout_seeds: Option<&[u64]>,
    strict: bool,
) -> Result<BatchGradient> {
    if batch.is_empty() {
        return Err(Error::invalid("cannot differentiate an empty batch"));
    }
    if let Some(seeds) = dropout_seeds {
        if seeds.len() != batch.len() {
            return Err(Error::shape("one dropout seed is needed per example"));
        }
    }
    if let Some(ex) = batch.iter().find(|ex| ex.target.len() != params.config.outputs) {
        return Err(Error::shape(format!(
            "target has {} values but the network emits {}",
            ex.target.len(),
            params.config.outputs
        )));
    }
    let scale = 2.0 / batch.len() as f64;

    let accumulate = |acc: &mut (f64, NetworkParams), i: usize| -> Result<()> {
        let ex = &batch[i];
        let cache = params.forward_cached(ex.input, dropout_seeds.map(|s| s[i]))?;
        let diff: Vec<f64> = cache.output.iter().zip(&ex.target).map(|(o, t)| o - t).collect();
        acc.0 += squared_error(&cache.output, &ex.target);
        let grad_out: Vec<f64> = diff.iter().map(|d| d * scale).collect();
        params.backward_sample(&cache, &grad_out, &mut acc.1)
    };

    let (sum, grads) = if strict {
        let indices: Vec<usize> = (0..batch.len()).collect();
        let partials = indices
            .par_chunks(STRICT_CHUNK)
            .map(|chunk| {
                let mut acc = (0.0, params.zeros_like());
                for &i in chunk {
                    accumulate(&mut acc, i)?;
                }
                Ok(acc)
            })
            .collect::<Result<Vec<_>>>()?;
        let mut total = (0.0, params.zeros_like());
        for (loss, g) in &partials {
            total.0 += loss;
            total.1.accumulate(g);
        }
        total
    } else {
        (0..batch.len())
            .into_par_iter()
            .try_fold(
                || (0.0, params.zeros_like()),
                |mut acc, i| {
                    accumulate(&mut acc, i)?;
                    Ok::<_, Error>(acc)
                },
            )
            .try_reduce(
                || (0.0, params.zeros_like()),
                |mut a, b| {
                    a.0 += b.0;
                    a.1.accumulate(&b.1);
                    Ok(a)
                },
            )?
    };
    Ok(BatchGradient { loss: sum / batch.len() as f64, grads })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub lr: f64,
    pub epochs: usize,
    pub seed: u64,
    /// Fixed-order gradient reduction for bitwise reproducibility.
    pub strict: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { batch_size: 64, lr: 1e-3, epochs: 30, seed: 0, strict: false }
    }
}

/// Trains `params` in place and returns the mean training loss of each epoch.
pub fn train(params: &mut NetworkParams, examples: &[Example<'_>], config: &TrainConfig) -> Result<Vec<f64>> {
    if examples.is_empty() {
        return Err(Error::invalid("training set is empty"));
    }
    if config.batch_size == 0 {
        return Err(Error::invalid("batch size must be positive"));
    }
    let mut adam = AdamState::new(params, AdamConfig::with_lr(config.lr))?;
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut history = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        let epoch_seed = mix_seed(config.seed, epoch as u64);
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(epoch_seed));
        let mut total = 0.0;
        for (b, idx) in order.chunks(config.batch_size).enumerate() {
            let batch: Vec<Example<'_>> = idx.iter().map(|&i| examples[i].clone()).collect();
            let seeds: Vec<u64> = (0..idx.len())
                .map(|j| mix_seed(epoch_seed, (b * config.batch_size + j) as u64))
                .collect();
            let step = backward(params, &batch, Some(&seeds), config.strict)?;
            if !step.loss.is_finite() {
                return Err(Error::Diverged { epoch: epoch + 1, batch: b + 1, loss: step.loss });
            }
            adam_step(params, &step.grads, &mut adam).map_err(|e| match e {
                Error::NonFinite(_) => Error::Diverged { epoch: epoch + 1, batch: b + 1, loss: step.loss },
                other => other,
            })?;
            total += step.loss * idx.len() as f64;
        }
        let mean = total / examples.len() as f64;
        log::debug!("epoch {}: loss {mean:.6e}", epoch + 1);
        history.push(mean);
    }
    Ok(history)
}
