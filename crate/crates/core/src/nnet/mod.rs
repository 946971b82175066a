//! A small convolutional encoder with hand-written backpropagation.
//!
//! Architecture: a chain of `conv -> SiLU` blocks (zero padding `k / 2`),
//! global average pooling to the backbone feature, and a bias-free linear
//! projection followed by L2 normalization. Everything runs in `f64`.

mod encoder;
pub mod io;
mod layers;
mod optim;

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

pub use encoder::{backward, backward_from_tape, forward, forward_with_tape, Embedding, Tape};
pub use io::{config_hash, load_params, save_params, PARAMS_MAGIC, PARAMS_VERSION};
pub use optim::{adamw_update, optimizer_step, LrSchedule, OptimizerConfig, OptimizerState};

use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ConvSpec {
    pub out_channels: usize,
    pub kernel: usize,
    pub stride: usize,
}

/// Spatial pooling of the last feature map.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Pooling {
    /// Per-channel mean.
    #[default]
    Mean,
    /// Per-channel mean followed by per-channel standard deviation.
    MeanStd,
}

/// Added to the variance before the square root in [`Pooling::MeanStd`].
pub const POOL_STD_EPS: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(default)]
pub struct EncoderConfig {
    pub in_channels: usize,
    pub conv_blocks: Vec<ConvSpec>,
    pub pooling: Pooling,
    pub projection_dim: usize,
    pub seed: u64,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        let block = |c| ConvSpec {
            out_channels: c,
            kernel: 3,
            stride: 2,
        };
        Self {
            in_channels: 3,
            conv_blocks: vec![block(16), block(32), block(64)],
            pooling: Pooling::Mean,
            projection_dim: 128,
            seed: 0,
        }
    }
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<()> {
        if self.in_channels != 1 && self.in_channels != 3 {
            return Err(Error::InvalidArgument(format!(
                "encoder input must have 1 or 3 channels, got {}",
                self.in_channels
            )));
        }
        if self.conv_blocks.is_empty() {
            return Err(Error::InvalidArgument("encoder needs at least one conv block".into()));
        }
        if let Some(b) = self
            .conv_blocks
            .iter()
            .find(|b| b.out_channels == 0 || b.kernel == 0 || b.stride == 0)
        {
            return Err(Error::InvalidArgument(format!("degenerate conv block {b:?}")));
        }
        if self.projection_dim < 2 {
            return Err(Error::InvalidArgument("projection dimension must be at least 2".into()));
        }
        Ok(())
    }

    /// Width of the pooled backbone feature.
    pub fn backbone_dim(&self) -> usize {
        let c = self.conv_blocks.last().map_or(0, |b| b.out_channels);
        match self.pooling {
            Pooling::Mean => c,
            Pooling::MeanStd => 2 * c,
        }
    }

    /// Spatial size after every block for an `h x w` input, or an error if any
    /// block would produce an empty map.
    pub fn spatial_chain(&self, h: usize, w: usize) -> Result<Vec<(usize, usize)>> {
        let mut dims = Vec::with_capacity(self.conv_blocks.len());
        let (mut ch, mut cw) = (h, w);
        for b in &self.conv_blocks {
            let pad = b.kernel / 2;
            if ch + 2 * pad < b.kernel || cw + 2 * pad < b.kernel {
                return Err(Error::Dimension(format!(
                    "{ch}x{cw} map too small for a {k}x{k} kernel",
                    k = b.kernel
                )));
            }
            ch = (ch + 2 * pad - b.kernel) / b.stride + 1;
            cw = (cw + 2 * pad - b.kernel) / b.stride + 1;
            dims.push((ch, cw));
        }
        Ok(dims)
    }
}

/// Weights and biases of one convolution; also used for their gradients and
/// optimizer moments. `weight` is `out x in x k x k`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvLayer {
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderParams {
    config: EncoderConfig,
    pub layers: Vec<ConvLayer>,
    /// `projection_dim x backbone_dim`, row-major.
    pub projection: Vec<f64>,
}

/// Gradient (or moment) buffers shaped exactly like [`EncoderParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct ParamGrads {
    pub layers: Vec<ConvLayer>,
    pub projection: Vec<f64>,
}

fn layer_shapes(cfg: &EncoderConfig) -> Vec<(usize, usize)> {
    let mut in_c = cfg.in_channels;
    cfg.conv_blocks
        .iter()
        .map(|b| {
            let shape = (b.out_channels * in_c * b.kernel * b.kernel, b.out_channels);
            in_c = b.out_channels;
            shape
        })
        .collect()
}

/// He-style fan-in scaled initialization, deterministic in `cfg.seed`.
pub fn init_encoder(cfg: &EncoderConfig) -> Result<EncoderParams> {
    cfg.validate()?;
    let mut in_c = cfg.in_channels;
    let mut layers = Vec::with_capacity(cfg.conv_blocks.len());
    for (i, b) in cfg.conv_blocks.iter().enumerate() {
        let fan_in = in_c * b.kernel * b.kernel;
        let normal = Normal::new(0.0, (2.0 / fan_in as f64).sqrt()).expect("positive std");
        let mut r = rng::stream(cfg.seed, i as u64, "init-conv");
        layers.push(ConvLayer {
            weight: (0..b.out_channels * fan_in).map(|_| normal.sample(&mut r)).collect(),
            bias: vec![0.0; b.out_channels],
        });
        in_c = b.out_channels;
    }
    let b = cfg.backbone_dim();
    let normal = Normal::new(0.0, (1.0 / b as f64).sqrt()).expect("positive std");
    let mut r = rng::stream(cfg.seed, 0, "init-projection");
    let projection = (0..cfg.projection_dim * b).map(|_| normal.sample(&mut r)).collect();
    Ok(EncoderParams {
        config: cfg.clone(),
        layers,
        projection,
    })
}

impl EncoderParams {
    pub fn config(&self) -> &EncoderConfig {
        &self.config
    }

    pub fn zero_grads(&self) -> ParamGrads {
        ParamGrads::zeros(&self.config)
    }

    pub fn num_values(&self) -> usize {
        self.slices().iter().map(|s| s.len()).sum()
    }

    /// Every tensor in storage order: per layer weight then bias, then the projection.
    pub fn slices(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = Vec::with_capacity(2 * self.layers.len() + 1);
        for l in &self.layers {
            out.push(&l.weight);
            out.push(&l.bias);
        }
        out.push(&self.projection);
        out
    }

    pub fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::with_capacity(2 * self.layers.len() + 1);
        for l in &mut self.layers {
            out.push(&mut l.weight);
            out.push(&mut l.bias);
        }
        out.push(&mut self.projection);
        out
    }

    /// Which entries of [`Self::slices`] receive weight decay (weights yes, biases no).
    pub fn decay_mask(&self) -> Vec<bool> {
        let mut out: Vec<bool> = self.layers.iter().flat_map(|_| [true, false]).collect();
        out.push(true);
        out
    }

    pub fn all_finite(&self) -> bool {
        self.slices().iter().all(|s| s.iter().all(|v| v.is_finite()))
    }

    fn check_shapes(&self) -> Result<()> {
        let shapes = layer_shapes(&self.config);
        let ok = self.layers.len() == shapes.len()
            && self
                .layers
                .iter()
                .zip(&shapes)
                .all(|(l, &(w, b))| l.weight.len() == w && l.bias.len() == b)
            && self.projection.len() == self.config.projection_dim * self.config.backbone_dim();
        if ok {
            Ok(())
        } else {
            Err(Error::Dimension("parameter tensors do not match the encoder configuration".into()))
        }
    }
}

impl ParamGrads {
    pub fn zeros(cfg: &EncoderConfig) -> Self {
        Self {
            layers: layer_shapes(cfg)
                .into_iter()
                .map(|(w, b)| ConvLayer {
                    weight: vec![0.0; w],
                    bias: vec![0.0; b],
                })
                .collect(),
            projection: vec![0.0; cfg.projection_dim * cfg.backbone_dim()],
        }
    }

    pub fn slices(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = Vec::with_capacity(2 * self.layers.len() + 1);
        for l in &self.layers {
            out.push(&l.weight);
            out.push(&l.bias);
        }
        out.push(&self.projection);
        out
    }

    pub fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::with_capacity(2 * self.layers.len() + 1);
        for l in &mut self.layers {
            out.push(&mut l.weight);
            out.push(&mut l.bias);
        }
        out.push(&mut self.projection);
        out
    }

    pub fn add_assign(&mut self, other: &ParamGrads) {
        for (dst, src) in self.slices_mut().into_iter().zip(other.slices()) {
            for (d, s) in dst.iter_mut().zip(src) {
                *d += s;
            }
        }
    }

    pub fn dot(&self, other: &ParamGrads) -> f64 {
        self.slices()
            .iter()
            .zip(other.slices())
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>())
            .sum()
    }

    pub fn all_finite(&self) -> bool {
        self.slices().iter().all(|s| s.iter().all(|v| v.is_finite()))
    }

    pub fn is_zero(&self) -> bool {
        self.slices().iter().all(|s| s.iter().all(|&v| v == 0.0))
    }

    fn same_shape(&self, params: &EncoderParams) -> bool {
        let a = self.slices();
        let b = params.slices();
        a.len() == b.len() && a.iter().zip(&b).all(|(x, y)| x.len() == y.len())
    }
}
