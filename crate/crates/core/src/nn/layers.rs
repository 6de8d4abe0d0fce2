use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Dense row-major array.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        if shape.contains(&0) {
            return Err(Error::shape(format!("tensor dimensions must be positive: {shape:?}")));
        }
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(Error::shape(format!(
                "shape {shape:?} needs {expected} values, got {}",
                data.len()
            )));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let len = shape.iter().product();
        Self { shape, data: vec![0.0; len] }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { shape: self.shape.clone(), data: self.data.iter().map(|&x| f(x)).collect() }
    }
}

pub fn leaky_relu(x: f64, alpha: f64) -> f64 {
    if x >= 0.0 {
        x
    } else {
        alpha * x
    }
}

/// Derivative of [`leaky_relu`]; the kink at 0 takes the negative-side slope.
pub fn leaky_relu_grad(x: f64, alpha: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else {
        alpha
    }
}

pub fn leaky_relu_tensor(x: &Tensor, alpha: f64) -> Tensor {
    x.map(|v| leaky_relu(v, alpha))
}

/// Inverted-dropout multipliers: 0 with probability `rate`, else `1/(1-rate)`.
pub fn dropout_mask(len: usize, rate: f64, seed: u64) -> Vec<f64> {
    let keep = 1.0 / (1.0 - rate);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..len)
        .map(|_| if rng.random::<f64>() < rate { 0.0 } else { keep })
        .collect()
}

pub fn dropout_forward(input: &Tensor, rate: f64, training: bool, seed: u64) -> Result<Tensor> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::invalid(format!("dropout rate must lie in [0, 1), got {rate}")));
    }
    if !training || rate == 0.0 {
        return Ok(input.clone());
    }
    let mask = dropout_mask(input.data.len(), rate, seed);
    let data = input.data.iter().zip(&mask).map(|(x, m)| x * m).collect();
    Ok(Tensor { shape: input.shape.clone(), data })
}

/// One-dimensional cross-correlation over `in_channels × len` inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv1dLayer {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel_size: usize,
    pub stride: usize,
    pub padding: usize,
    /// `out × in × kernel`, row-major.
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Conv1dLayer {
    pub fn zeros(in_channels: usize, out_channels: usize, kernel_size: usize, stride: usize, padding: usize) -> Self {
        Self {
            in_channels,
            out_channels,
            kernel_size,
            stride,
            padding,
            weight: vec![0.0; out_channels * in_channels * kernel_size],
            bias: vec![0.0; out_channels],
        }
    }

    pub fn output_len(&self, len: usize) -> Result<usize> {
        let padded = len + 2 * self.padding;
        if self.stride == 0 || self.kernel_size == 0 || padded < self.kernel_size {
            return Err(Error::shape(format!(
                "kernel {} does not fit padded length {padded}",
                self.kernel_size
            )));
        }
        Ok((padded - self.kernel_size) / self.stride + 1)
    }

    /// Output positions `t` whose tap `j` reads an in-range input sample.
    fn valid_range(&self, j: usize, len: usize, out_len: usize) -> std::ops::Range<usize> {
        let (s, p) = (self.stride, self.padding);
        let lo = if p > j { (p - j).div_ceil(s) } else { 0 };
        if len + p <= j {
            return 0..0;
        }
        let hi = ((len - 1 + p - j) / s + 1).min(out_len);
        lo..hi.max(lo)
    }

    pub fn forward(&self, input: &[f64], len: usize) -> Result<Vec<f64>> {
        if input.len() != self.in_channels * len {
            return Err(Error::shape(format!(
                "conv expects {} × {len} input, got {} values",
                self.in_channels,
                input.len()
            )));
        }
        let out_len = self.output_len(len)?;
        let k = self.kernel_size;
        let mut out = vec![0.0; self.out_channels * out_len];
        for (o, row) in out.chunks_mut(out_len).enumerate() {
            row.fill(self.bias[o]);
            for c in 0..self.in_channels {
                let x = &input[c * len..(c + 1) * len];
                let w = &self.weight[(o * self.in_channels + c) * k..][..k];
                for (j, &wj) in w.iter().enumerate() {
                    for t in self.valid_range(j, len, out_len) {
                        row[t] += wj * x[t * self.stride + j - self.padding];
                    }
                }
            }
        }
        Ok(out)
    }

    /// Accumulates parameter gradients into `grad` and, when requested,
    /// writes the gradient with respect to the input.
    pub fn backward(
        &self,
        input: &[f64],
        len: usize,
        grad_out: &[f64],
        grad: &mut Conv1dLayer,
        grad_input: Option<&mut [f64]>,
    ) -> Result<()> {
        let out_len = self.output_len(len)?;
        if grad_out.len() != self.out_channels * out_len {
            return Err(Error::shape("conv output gradient has the wrong length"));
        }
        let k = self.kernel_size;
        let mut grad_input = grad_input;
        if let Some(gi) = grad_input.as_deref_mut() {
            gi.fill(0.0);
        }
        for (o, gy) in grad_out.chunks(out_len).enumerate() {
            grad.bias[o] += gy.iter().sum::<f64>();
            for c in 0..self.in_channels {
                let x = &input[c * len..(c + 1) * len];
                let base = (o * self.in_channels + c) * k;
                for j in 0..k {
                    let range = self.valid_range(j, len, out_len);
                    let mut acc = 0.0;
                    for t in range.clone() {
                        acc += gy[t] * x[t * self.stride + j - self.padding];
                    }
                    grad.weight[base + j] += acc;
                    if let Some(gi) = grad_input.as_deref_mut() {
                        let wj = self.weight[base + j];
                        let gx = &mut gi[c * len..(c + 1) * len];
                        for t in range {
                            gx[t * self.stride + j - self.padding] += wj * gy[t];
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

/// Fully connected layer `W x + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub in_dim: usize,
    pub out_dim: usize,
    /// `out × in`, row-major.
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl DenseLayer {
    pub fn zeros(in_dim: usize, out_dim: usize) -> Self {
        Self { in_dim, out_dim, weight: vec![0.0; in_dim * out_dim], bias: vec![0.0; out_dim] }
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        if input.len() != self.in_dim {
            return Err(Error::shape(format!(
                "dense layer expects {} inputs, got {}",
                self.in_dim,
                input.len()
            )));
        }
        Ok(self
            .weight
            .chunks(self.in_dim)
            .zip(&self.bias)
            .map(|(row, b)| b + row.iter().zip(input).map(|(w, x)| w * x).sum::<f64>())
            .collect())
    }

    pub fn backward(&self, input: &[f64], grad_out: &[f64], grad: &mut DenseLayer, grad_input: Option<&mut [f64]>) {
        for (o, &g) in grad_out.iter().enumerate() {
            grad.bias[o] += g;
            if g == 0.0 {
                continue;
            }
            let row = &mut grad.weight[o * self.in_dim..(o + 1) * self.in_dim];
            for (w, x) in row.iter_mut().zip(input) {
                *w += g * x;
            }
        }
        if let Some(gi) = grad_input {
            gi.fill(0.0);
            for (row, &g) in self.weight.chunks(self.in_dim).zip(grad_out) {
                if g == 0.0 {
                    continue;
                }
                for (gx, w) in gi.iter_mut().zip(row) {
                    *gx += w * g;
                }
            }
        }
    }
}

pub fn conv1d_forward(layer: &Conv1dLayer, input: &Tensor) -> Result<Tensor> {
    let [channels, len] = input.shape() else {
        return Err(Error::shape("conv input must be channels × length"));
    };
    if *channels != layer.in_channels {
        return Err(Error::shape(format!(
            "conv expects {} channels, got {channels}",
            layer.in_channels
        )));
    }
    let out = layer.forward(input.data(), *len)?;
    let out_len = layer.output_len(*len)?;
    Tensor::new(vec![layer.out_channels, out_len], out)
}

pub fn dense_forward(layer: &DenseLayer, input: &[f64]) -> Result<Vec<f64>> {
    layer.forward(input)
}
