//! Single-head and multi-head convolutional regressors.
//!
//! Both share the same tail: flatten, two dense hidden layers each followed
//! by Leaky ReLU and dropout, and a linear output head. The single-head trunk
//! runs six convolutions over all six IMU channels; the multi-head variant
//! runs separate six-layer stacks over the accelerometer and gyroscope rows
//! and concatenates their flattened outputs.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::layers::{dropout_mask, leaky_relu, leaky_relu_grad, Conv1dLayer, DenseLayer};
use crate::dataset::CHANNELS;
use crate::error::{Error, Result};
use crate::ins::Vector3;

pub const CONV_LAYERS: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Architecture {
    SingleHead,
    MultiHead,
}

impl Architecture {
    pub fn tag(&self) -> &'static str {
        match self {
            Architecture::SingleHead => "single",
            Architecture::MultiHead => "multi",
        }
    }

    fn branch_inputs(&self) -> &'static [usize] {
        match self {
            Architecture::SingleHead => &[CHANNELS],
            Architecture::MultiHead => &[3, 3],
        }
    }

    fn branch_names(&self) -> &'static [&'static str] {
        match self {
            Architecture::SingleHead => &[""],
            Architecture::MultiHead => &["acc.", "gyro."],
        }
    }
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Architecture {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "single" => Ok(Architecture::SingleHead),
            "multi" => Ok(Architecture::MultiHead),
            other => Err(Error::invalid(format!("unknown architecture `{other}`"))),
        }
    }
}

/// Layer sizes and regularization of a network.
///
/// Convolutions always use stride 1 and `kernel_size / 2` zero padding, so
/// odd kernels preserve the window length.
#[derive(Debug, Clone, PartialEq)]
pub struct NetConfig {
    pub arch: Architecture,
    pub window_size: usize,
    /// Output channels of the six convolutions (per branch for multi-head).
    pub conv_channels: [usize; CONV_LAYERS],
    pub kernel_size: usize,
    pub hidden: [usize; 2],
    pub outputs: usize,
    pub alpha: f64,
    pub dropout: f64,
}

impl NetConfig {
    pub fn single_head(window_size: usize) -> Self {
        Self {
            arch: Architecture::SingleHead,
            window_size,
            conv_channels: [64, 64, 128, 128, 256, 256],
            kernel_size: 3,
            hidden: [512, 128],
            outputs: 3,
            alpha: 0.01,
            dropout: 0.2,
        }
    }

    pub fn multi_head(window_size: usize) -> Self {
        Self {
            arch: Architecture::MultiHead,
            conv_channels: [32, 32, 64, 64, 128, 128],
            ..Self::single_head(window_size)
        }
    }

    pub fn for_arch(arch: Architecture, window_size: usize) -> Self {
        match arch {
            Architecture::SingleHead => Self::single_head(window_size),
            Architecture::MultiHead => Self::multi_head(window_size),
        }
    }

    pub fn padding(&self) -> usize {
        self.kernel_size / 2
    }

    pub fn validate(&self) -> Result<()> {
        if self.window_size == 0 || self.kernel_size == 0 || self.outputs == 0 {
            return Err(Error::invalid("window size, kernel size and outputs must be positive"));
        }
        if self.conv_channels.contains(&0) || self.hidden.contains(&0) {
            return Err(Error::invalid("layer widths must be positive"));
        }
        if !(self.alpha > 0.0) {
            return Err(Error::invalid("leaky relu slope must be positive"));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::invalid("dropout rate must lie in [0, 1)"));
        }
        let mut len = self.window_size;
        for _ in 0..CONV_LAYERS {
            let padded = len + 2 * self.padding();
            if padded < self.kernel_size {
                return Err(Error::invalid("kernel does not fit the window"));
            }
            len = padded - self.kernel_size + 1;
        }
        Ok(())
    }
}

/// Every learnable weight and bias of one network.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParams {
    pub config: NetConfig,
    /// One conv stack per input head.
    pub branches: Vec<Vec<Conv1dLayer>>,
    pub hidden: Vec<DenseLayer>,
    pub head: DenseLayer,
}

/// Read-only view of one named parameter array.
pub struct Block<'a> {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: &'a [f64],
}

impl NetworkParams {
    pub fn zeros(config: NetConfig) -> Result<Self> {
        config.validate()?;
        let (k, pad) = (config.kernel_size, config.padding());
        let mut flat = 0;
        let mut branches = Vec::new();
        for &input in config.arch.branch_inputs() {
            let mut layers = Vec::with_capacity(CONV_LAYERS);
            let mut ch = input;
            let mut len = config.window_size;
            for &out in &config.conv_channels {
                let layer = Conv1dLayer::zeros(ch, out, k, 1, pad);
                len = layer.output_len(len)?;
                ch = out;
                layers.push(layer);
            }
            flat += ch * len;
            branches.push(layers);
        }
        let hidden = vec![
            DenseLayer::zeros(flat, config.hidden[0]),
            DenseLayer::zeros(config.hidden[0], config.hidden[1]),
        ];
        let head = DenseLayer::zeros(config.hidden[1], config.outputs);
        Ok(Self { config, branches, hidden, head })
    }

    /// Uniform initialization in `±1/sqrt(fan_in)` for weights and biases.
    pub fn init(config: NetConfig, seed: u64) -> Result<Self> {
        let mut params = Self::zeros(config)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut fill = |values: &mut [f64], fan_in: usize| {
            let bound = 1.0 / (fan_in as f64).sqrt();
            values.iter_mut().for_each(|v| *v = rng.random_range(-bound..bound));
        };
        for layer in params.branches.iter_mut().flatten() {
            let fan_in = layer.in_channels * layer.kernel_size;
            fill(&mut layer.weight, fan_in);
            fill(&mut layer.bias, fan_in);
        }
        for layer in params.hidden.iter_mut().chain(std::iter::once(&mut params.head)) {
            let fan_in = layer.in_dim;
            fill(&mut layer.weight, fan_in);
            fill(&mut layer.bias, fan_in);
        }
        Ok(params)
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.config.clone()).expect("config already validated")
    }

    pub fn arch(&self) -> Architecture {
        self.config.arch
    }

    /// Length of the concatenated feature vector fed to the first dense layer.
    pub fn feature_len(&self) -> usize {
        self.hidden[0].in_dim
    }

    /// Flattened feature length produced by each branch.
    pub fn branch_feature_lens(&self) -> Vec<usize> {
        self.branches
            .iter()
            .map(|b| {
                let last = b.last().expect("six conv layers");
                let mut len = self.config.window_size;
                for layer in b {
                    len = layer.output_len(len).expect("validated");
                }
                last.out_channels * len
            })
            .collect()
    }

    /// Parameter arrays in a fixed order, with names and shapes.
    pub fn blocks(&self) -> Vec<Block<'_>> {
        let mut out = Vec::new();
        for (prefix, branch) in self.config.arch.branch_names().iter().zip(&self.branches) {
            for (i, layer) in branch.iter().enumerate() {
                out.push(Block {
                    name: format!("{prefix}conv{i}.weight"),
                    shape: vec![layer.out_channels, layer.in_channels, layer.kernel_size],
                    values: &layer.weight,
                });
                out.push(Block {
                    name: format!("{prefix}conv{i}.bias"),
                    shape: vec![layer.out_channels],
                    values: &layer.bias,
                });
            }
        }
        let names = ["dense0", "dense1", "head"];
        for (name, layer) in names.iter().zip(self.hidden.iter().chain(std::iter::once(&self.head))) {
            out.push(Block {
                name: format!("{name}.weight"),
                shape: vec![layer.out_dim, layer.in_dim],
                values: &layer.weight,
            });
            out.push(Block { name: format!("{name}.bias"), shape: vec![layer.out_dim], values: &layer.bias });
        }
        out
    }

    /// Mutable parameter arrays, in the same order as [`Self::blocks`].
    pub fn blocks_mut(&mut self) -> Vec<&mut Vec<f64>> {
        let mut out = Vec::new();
        for layer in self.branches.iter_mut().flatten() {
            out.push(&mut layer.weight);
            out.push(&mut layer.bias);
        }
        for layer in self.hidden.iter_mut().chain(std::iter::once(&mut self.head)) {
            out.push(&mut layer.weight);
            out.push(&mut layer.bias);
        }
        out
    }

    pub fn param_count(&self) -> usize {
        self.blocks().iter().map(|b| b.values.len()).sum()
    }

    /// Adds `other` elementwise.
    pub fn accumulate(&mut self, other: &NetworkParams) {
        for (a, b) in self.blocks_mut().into_iter().zip(other.blocks()) {
            for (x, y) in a.iter_mut().zip(b.values) {
                *x += y;
            }
        }
    }

    fn check_input(&self, input: &[f64]) -> Result<()> {
        let expected = CHANNELS * self.config.window_size;
        if input.len() != expected {
            return Err(Error::shape(format!(
                "network expects a 6 × {} window ({expected} values), got {}",
                self.config.window_size,
                input.len()
            )));
        }
        Ok(())
    }

    /// Inference-mode forward pass on a `6 × n` window.
    pub fn predict(&self, input: &[f64]) -> Result<Vec<f64>> {
        self.check_input(input)?;
        Ok(self.forward_cached(input, None)?.output)
    }

    /// Forward pass keeping the activations needed by
    /// [`Self::backward_sample`]. `dropout_seed` enables training-mode
    /// dropout with masks drawn from that seed.
    pub fn forward_cached(&self, input: &[f64], dropout_seed: Option<u64>) -> Result<ForwardCache> {
        self.check_input(input)?;
        let alpha = self.config.alpha;
        let n = self.config.window_size;
        let heads = self.branches.len();
        let rows_per_head = CHANNELS / heads;

        let mut branch_caches = Vec::with_capacity(heads);
        let mut features = Vec::with_capacity(self.feature_len());
        for (b, branch) in self.branches.iter().enumerate() {
            let mut x = input[b * rows_per_head * n..(b + 1) * rows_per_head * n].to_vec();
            let mut len = n;
            let mut cache = BranchCache::default();
            for layer in branch {
                let pre = layer.forward(&x, len)?;
                let out_len = layer.output_len(len)?;
                let act: Vec<f64> = pre.iter().map(|&z| leaky_relu(z, alpha)).collect();
                cache.inputs.push(x);
                cache.lens.push(len);
                cache.pre.push(pre);
                x = act;
                len = out_len;
            }
            features.extend_from_slice(&x);
            branch_caches.push(cache);
        }

        let mut hidden_inputs = Vec::with_capacity(2);
        let mut hidden_pre = Vec::with_capacity(2);
        let mut masks = Vec::with_capacity(2);
        let mut x = features;
        for (i, layer) in self.hidden.iter().enumerate() {
            let pre = layer.forward(&x)?;
            let mut act: Vec<f64> = pre.iter().map(|&z| leaky_relu(z, alpha)).collect();
            let mask = match dropout_seed {
                Some(seed) if self.config.dropout > 0.0 => {
                    let m = dropout_mask(act.len(), self.config.dropout, mix_seed(seed, i as u64));
                    act.iter_mut().zip(&m).for_each(|(a, m)| *a *= m);
                    Some(m)
                }
                _ => None,
            };
            hidden_inputs.push(x);
            hidden_pre.push(pre);
            masks.push(mask);
            x = act;
        }
        let output = self.head.forward(&x)?;
        Ok(ForwardCache { branches: branch_caches, hidden_inputs, hidden_pre, masks, head_input: x, output })
    }

    /// Backpropagates `grad_output` (dLoss/dOutput) through a cached forward
    /// pass, adding parameter gradients into `grads`.
    pub fn backward_sample(&self, cache: &ForwardCache, grad_output: &[f64], grads: &mut NetworkParams) -> Result<()> {
        if grad_output.len() != self.config.outputs {
            return Err(Error::shape("output gradient has the wrong length"));
        }
        let alpha = self.config.alpha;
        let mut d = vec![0.0; self.head.in_dim];
        self.head.backward(&cache.head_input, grad_output, &mut grads.head, Some(&mut d));

        for i in (0..self.hidden.len()).rev() {
            if let Some(mask) = &cache.masks[i] {
                d.iter_mut().zip(mask).for_each(|(g, m)| *g *= m);
            }
            d.iter_mut()
                .zip(&cache.hidden_pre[i])
                .for_each(|(g, &z)| *g *= leaky_relu_grad(z, alpha));
            let mut d_in = vec![0.0; self.hidden[i].in_dim];
            self.hidden[i].backward(&cache.hidden_inputs[i], &d, &mut grads.hidden[i], Some(&mut d_in));
            d = d_in;
        }

        let mut offset = 0;
        for (b, branch) in self.branches.iter().enumerate() {
            let bc = &cache.branches[b];
            let last = CONV_LAYERS - 1;
            let feat_len = bc.pre[last].len();
            let mut g = d[offset..offset + feat_len].to_vec();
            offset += feat_len;
            for l in (0..CONV_LAYERS).rev() {
                g.iter_mut().zip(&bc.pre[l]).for_each(|(g, &z)| *g *= leaky_relu_grad(z, alpha));
                let layer = &branch[l];
                if l > 0 {
                    let mut g_in = vec![0.0; bc.inputs[l].len()];
                    layer.backward(&bc.inputs[l], bc.lens[l], &g, &mut grads.branches[b][l], Some(&mut g_in))?;
                    g = g_in;
                } else {
                    layer.backward(&bc.inputs[l], bc.lens[l], &g, &mut grads.branches[b][l], None)?;
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Default, Clone)]
struct BranchCache {
    inputs: Vec<Vec<f64>>,
    lens: Vec<usize>,
    pre: Vec<Vec<f64>>,
}

/// Intermediate values of one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    branches: Vec<BranchCache>,
    hidden_inputs: Vec<Vec<f64>>,
    hidden_pre: Vec<Vec<f64>>,
    masks: Vec<Option<Vec<f64>>>,
    head_input: Vec<f64>,
    pub output: Vec<f64>,
}

impl ForwardCache {
    /// Feature vector entering the first dense layer.
    pub fn features(&self) -> &[f64] {
        &self.hidden_inputs[0]
    }

    /// Smallest |pre-activation| over all Leaky ReLU units; distance to a kink.
    pub fn min_abs_preactivation(&self) -> f64 {
        self.branches
            .iter()
            .flat_map(|b| b.pre.iter().flatten())
            .chain(self.hidden_pre.iter().flatten())
            .fold(f64::INFINITY, |m, z| m.min(z.abs()))
    }
}

/// SplitMix64 finalizer over a pair, for deriving independent stream seeds.
pub fn mix_seed(a: u64, b: u64) -> u64 {
    let mut z = a ^ b.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(0x632B_E59B_D9B4_E019);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn to_vector3(out: Vec<f64>) -> Result<Vector3> {
    match out.as_slice() {
        [x, y, z] => Ok(Vector3::new(*x, *y, *z)),
        _ => Err(Error::shape(format!("expected a 3-unit output head, found {}", out.len()))),
    }
}

/// Displacement predicted by a single-head network for a `6 × n` window.
pub fn forward_single_head(params: &NetworkParams, input: &[f64]) -> Result<Vector3> {
    if params.arch() != Architecture::SingleHead {
        return Err(Error::shape("network is not single-head"));
    }
    to_vector3(params.predict(input)?)
}

/// Displacement predicted by a multi-head network from separate `3 × n`
/// accelerometer and gyroscope windows.
pub fn forward_multi_head(params: &NetworkParams, acc: &[f64], gyro: &[f64]) -> Result<Vector3> {
    if params.arch() != Architecture::MultiHead {
        return Err(Error::shape("network is not multi-head"));
    }
    if acc.len() != gyro.len() {
        return Err(Error::shape(format!(
            "accelerometer window has {} values but gyroscope has {}",
            acc.len(),
            gyro.len()
        )));
    }
    let mut input = Vec::with_capacity(acc.len() * 2);
    input.extend_from_slice(acc);
    input.extend_from_slice(gyro);
    to_vector3(params.predict(&input)?)
}
