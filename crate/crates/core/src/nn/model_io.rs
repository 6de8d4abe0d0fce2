//! `QPNET1` text model files.
//!
//! ```text
//! QPNET1
//! arch=single n=100 alpha=0.01 dropout=0.2
//! conv0.weight 64,6,3 <values...>
//! ...
//! norm.mean 6 <values...>
//! norm.std 6 <values...>
//! ```
//!
//! Values are written with 17 significant digits so loading is bit-exact.
//! Layer widths are recovered from the block shapes. The optional `norm.*`
//! blocks carry the input standardization the network was trained with.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::network::{Architecture, NetConfig, NetworkParams, CONV_LAYERS};
use crate::dataset::{NormStats, CHANNELS};
use crate::error::{Error, Result};

pub const MAGIC: &str = "QPNET1";

/// A network plus the input statistics it expects.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub params: NetworkParams,
    pub norm: Option<NormStats>,
}

impl Model {
    /// Network output for one raw (unnormalized) `6 × n` window.
    pub fn predict(&self, raw_input: &[f64]) -> Result<Vec<f64>> {
        match &self.norm {
            Some(norm) => {
                let mut x = raw_input.to_vec();
                norm.apply_input(&mut x);
                self.params.predict(&x)
            }
            None => self.params.predict(raw_input),
        }
    }

    pub fn window_size(&self) -> usize {
        self.params.config.window_size
    }
}

fn write_block(out: &mut String, name: &str, shape: &[usize], values: &[f64]) {
    let shape: Vec<String> = shape.iter().map(usize::to_string).collect();
    let _ = write!(out, "{name} {}", shape.join(","));
    for v in values {
        let _ = write!(out, " {v:.16e}");
    }
    out.push('\n');
}

pub fn model_to_string(model: &Model) -> String {
    let p = &model.params;
    let c = &p.config;
    let mut out = format!(
        "{MAGIC}\narch={} n={} alpha={} dropout={}\n",
        c.arch, c.window_size, c.alpha, c.dropout
    );
    for b in p.blocks() {
        write_block(&mut out, &b.name, &b.shape, b.values);
    }
    if let Some(norm) = &model.norm {
        write_block(&mut out, "norm.mean", &[CHANNELS], &norm.mean);
        write_block(&mut out, "norm.std", &[CHANNELS], &norm.std);
    }
    out
}

pub fn save_model(model: &Model, path: &Path) -> Result<()> {
    fs::write(path, model_to_string(model))?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<Model> {
    let text = fs::read_to_string(path).map_err(|e| Error::format(path, format!("cannot read model: {e}")))?;
    parse_model(&text).map_err(|msg| Error::format(path, msg))
}

struct RawBlock {
    name: String,
    shape: Vec<usize>,
    values: Vec<f64>,
}

fn parse_block(line: &str) -> std::result::Result<RawBlock, String> {
    let mut parts = line.split_whitespace();
    let name = parts.next().ok_or("empty block line")?.to_string();
    let shape = parts
        .next()
        .ok_or_else(|| format!("block {name}: missing shape"))?
        .split(',')
        .map(|d| d.parse::<usize>().map_err(|_| format!("block {name}: bad shape `{d}`")))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let values = parts
        .map(|v| v.parse::<f64>().map_err(|_| format!("block {name}: bad value `{v}`")))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    if shape.iter().product::<usize>() != values.len() {
        return Err(format!(
            "block {name}: shape {shape:?} needs {} values, found {}",
            shape.iter().product::<usize>(),
            values.len()
        ));
    }
    if let Some(v) = values.iter().find(|v| !v.is_finite()) {
        return Err(format!("block {name}: non-finite value {v}"));
    }
    Ok(RawBlock { name, shape, values })
}

pub fn parse_model(text: &str) -> std::result::Result<Model, String> {
    let mut lines = text.lines();
    if lines.next() != Some(MAGIC) {
        return Err(format!("missing `{MAGIC}` magic line"));
    }
    let header = lines.next().ok_or("missing header line")?;
    let mut arch = None;
    let mut window = None;
    let mut alpha = None;
    let mut dropout = None;
    for kv in header.split_whitespace() {
        let (k, v) = kv.split_once('=').ok_or_else(|| format!("bad header field `{kv}`"))?;
        let bad = || format!("bad header value `{kv}`");
        match k {
            "arch" => arch = Some(v.parse::<Architecture>().map_err(|e| e.to_string())?),
            "n" => window = Some(v.parse::<usize>().map_err(|_| bad())?),
            "alpha" => alpha = Some(v.parse::<f64>().map_err(|_| bad())?),
            "dropout" => dropout = Some(v.parse::<f64>().map_err(|_| bad())?),
            other => return Err(format!("unknown header key `{other}`")),
        }
    }
    let (Some(arch), Some(window_size), Some(alpha), Some(dropout)) = (arch, window, alpha, dropout) else {
        return Err("header needs arch, n, alpha and dropout".into());
    };

    let mut blocks = Vec::new();
    let mut norm_mean = None;
    let mut norm_std = None;
    for line in lines.filter(|l| !l.trim().is_empty()) {
        let b = parse_block(line)?;
        match b.name.as_str() {
            "norm.mean" => norm_mean = Some(b.values),
            "norm.std" => norm_std = Some(b.values),
            _ => blocks.push(b),
        }
    }

    // conv0.weight (or acc.conv0.weight) is out × in × kernel
    let conv_prefix = match arch {
        Architecture::SingleHead => "",
        Architecture::MultiHead => "acc.",
    };
    let shape_of = |name: &str| {
        blocks
            .iter()
            .find(|b| b.name == name)
            .map(|b| b.shape.clone())
            .ok_or_else(|| format!("missing block {name}"))
    };
    let mut conv_channels = [0; CONV_LAYERS];
    let mut kernel_size = 0;
    for (i, ch) in conv_channels.iter_mut().enumerate() {
        let s = shape_of(&format!("{conv_prefix}conv{i}.weight"))?;
        if s.len() != 3 {
            return Err(format!("conv{i}.weight must be 3-dimensional"));
        }
        *ch = s[0];
        kernel_size = s[2];
    }
    let d0 = shape_of("dense0.weight")?;
    let d1 = shape_of("dense1.weight")?;
    let head = shape_of("head.weight")?;
    let config = NetConfig {
        arch,
        window_size,
        conv_channels,
        kernel_size,
        hidden: [d0[0], d1[0]],
        outputs: head[0],
        alpha,
        dropout,
    };
    let mut params = NetworkParams::zeros(config).map_err(|e| e.to_string())?;

    let expected: Vec<(String, Vec<usize>)> = params.blocks().into_iter().map(|b| (b.name, b.shape)).collect();
    if expected.len() != blocks.len() {
        return Err(format!("expected {} parameter blocks, found {}", expected.len(), blocks.len()));
    }
    for ((dst, (name, shape)), src) in params.blocks_mut().into_iter().zip(&expected).zip(&blocks) {
        if &src.name != name || &src.shape != shape {
            return Err(format!(
                "block {} {:?} does not match expected {name} {shape:?}",
                src.name, src.shape
            ));
        }
        dst.copy_from_slice(&src.values);
    }

    let norm = match (norm_mean, norm_std) {
        (Some(mean), Some(std)) if mean.len() == CHANNELS && std.len() == CHANNELS => {
            let mut stats = NormStats::identity();
            stats.mean.copy_from_slice(&mean);
            stats.std.copy_from_slice(&std);
            Some(stats)
        }
        (None, None) => None,
        _ => return Err("norm.mean and norm.std must both be present with 6 values".into()),
    };
    Ok(Model { params, norm })
}
