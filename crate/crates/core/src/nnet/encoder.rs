use super::layers::{col2im, gemm, im2col, silu, silu_grad, ConvGeom};
use super::{EncoderParams, ParamGrads, Pooling, POOL_STD_EPS};
use crate::error::{Error, Result};
use crate::imaging::{Image, LUMA_WEIGHTS};

/// Encoder output for one image.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    /// Pooled feature before the projection.
    pub backbone: Vec<f64>,
    /// Unit-norm projected embedding.
    pub projected: Vec<f64>,
}

struct LayerTape {
    geom: ConvGeom,
    cols: Vec<f64>,
    pre_act: Vec<f64>,
}

/// Intermediate values of one forward pass, consumed by [`backward_from_tape`].
pub struct Tape {
    layers: Vec<LayerTape>,
    pooled: Vec<f64>,
    norm: f64,
    projected: Vec<f64>,
}

fn to_chw(img: &Image, channels: usize) -> Vec<f64> {
    let (h, w) = (img.height(), img.width());
    let n = h * w;
    match (img.channels(), channels) {
        (1, 1) => img.data().to_vec(),
        (3, 1) => img
            .data()
            .chunks_exact(3)
            .map(|p| LUMA_WEIGHTS[0] * p[0] + LUMA_WEIGHTS[1] * p[1] + LUMA_WEIGHTS[2] * p[2])
            .collect(),
        (c, 3) => {
            let mut out = vec![0.0; 3 * n];
            for i in 0..n {
                for ch in 0..3 {
                    out[ch * n + i] = img.data()[i * c + ch.min(c - 1)];
                }
            }
            out
        }
        _ => unreachable!("validated channel counts"),
    }
}

fn run_forward(params: &EncoderParams, img: &Image, keep: bool) -> Result<(Embedding, Option<Tape>)> {
    let cfg = params.config();
    params.check_shapes()?;
    let chain = cfg.spatial_chain(img.height(), img.width())?;
    let mut act = to_chw(img, cfg.in_channels);
    let (mut in_c, mut in_h, mut in_w) = (cfg.in_channels, img.height(), img.width());
    let mut tapes = Vec::with_capacity(chain.len());
    for ((block, layer), &(out_h, out_w)) in cfg.conv_blocks.iter().zip(&params.layers).zip(&chain) {
        let geom = ConvGeom {
            in_c,
            in_h,
            in_w,
            kernel: block.kernel,
            stride: block.stride,
            pad: block.kernel / 2,
            out_h,
            out_w,
        };
        let cols = im2col(&act, &geom);
        let l = geom.cols();
        let mut z = vec![0.0; block.out_channels * l];
        for (oc, row) in z.chunks_exact_mut(l).enumerate() {
            row.fill(layer.bias[oc]);
        }
        gemm(block.out_channels, geom.rows(), l, &layer.weight, false, &cols, false, &mut z, 1.0);
        act = z.iter().map(|&v| silu(v)).collect();
        if keep {
            tapes.push(LayerTape { geom, cols, pre_act: z });
        }
        in_c = block.out_channels;
        in_h = out_h;
        in_w = out_w;
    }
    let spatial = in_h * in_w;
    let mut pooled: Vec<f64> = act
        .chunks_exact(spatial)
        .map(|c| c.iter().sum::<f64>() / spatial as f64)
        .collect();
    if cfg.pooling == Pooling::MeanStd {
        let stds: Vec<f64> = act
            .chunks_exact(spatial)
            .zip(&pooled)
            .map(|(c, m)| (c.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / spatial as f64 + POOL_STD_EPS).sqrt())
            .collect();
        pooled.extend(stds);
    }
    let b = pooled.len();
    let unnormalized: Vec<f64> = params
        .projection
        .chunks_exact(b)
        .map(|row| row.iter().zip(&pooled).map(|(w, h)| w * h).sum())
        .collect();
    let norm = unnormalized.iter().map(|v| v * v).sum::<f64>().sqrt();
    if !(norm.is_finite() && norm > 0.0) {
        return Err(Error::Numeric(format!("projection norm {norm} cannot be normalized")));
    }
    let projected: Vec<f64> = unnormalized.iter().map(|v| v / norm).collect();
    let emb = Embedding {
        backbone: pooled.clone(),
        projected: projected.clone(),
    };
    let tape = keep.then(|| Tape {
        layers: tapes,
        pooled,
        norm,
        projected,
    });
    Ok((emb, tape))
}

pub fn forward(params: &EncoderParams, img: &Image) -> Result<Embedding> {
    run_forward(params, img, false).map(|(e, _)| e)
}

pub fn forward_with_tape(params: &EncoderParams, img: &Image) -> Result<(Embedding, Tape)> {
    let (e, t) = run_forward(params, img, true)?;
    Ok((e, t.expect("tape requested")))
}

/// Gradients of `upstream . projected` with respect to every parameter.
pub fn backward_from_tape(params: &EncoderParams, tape: &Tape, upstream: &[f64]) -> Result<ParamGrads> {
    let cfg = params.config();
    let p = cfg.projection_dim;
    if upstream.len() != p {
        return Err(Error::Dimension(format!(
            "upstream gradient has {} entries, embedding has {p}",
            upstream.len()
        )));
    }
    let mut grads = params.zero_grads();
    if upstream.iter().all(|&g| g == 0.0) {
        return Ok(grads);
    }
    // y = u / |u|  =>  du = (g - y (y . g)) / |u|
    let yg: f64 = tape.projected.iter().zip(upstream).map(|(y, g)| y * g).sum();
    let du: Vec<f64> = upstream
        .iter()
        .zip(&tape.projected)
        .map(|(g, y)| (g - y * yg) / tape.norm)
        .collect();
    let b = tape.pooled.len();
    for (i, d) in du.iter().enumerate() {
        for (j, h) in tape.pooled.iter().enumerate() {
            grads.projection[i * b + j] = d * h;
        }
    }
    let mut dpool = vec![0.0; b];
    for (i, d) in du.iter().enumerate() {
        for (j, acc) in dpool.iter_mut().enumerate() {
            *acc += params.projection[i * b + j] * d;
        }
    }
    let last = tape.layers.last().expect("at least one layer");
    let spatial = last.geom.cols();
    let channels = cfg.conv_blocks.last().expect("at least one block").out_channels;
    let mut dact: Vec<f64> = dpool[..channels]
        .iter()
        .flat_map(|&d| std::iter::repeat_n(d / spatial as f64, spatial))
        .collect();
    if cfg.pooling == Pooling::MeanStd {
        // s = sqrt(var + eps)  =>  ds/da_i = (a_i - m) / (n s)
        for c in 0..channels {
            let (m, sd, ds) = (tape.pooled[c], tape.pooled[channels + c], dpool[channels + c]);
            let pre = &last.pre_act[c * spatial..(c + 1) * spatial];
            for (d, &z) in dact[c * spatial..(c + 1) * spatial].iter_mut().zip(pre) {
                *d += ds * (silu(z) - m) / (spatial as f64 * sd);
            }
        }
    }
    for (idx, lt) in tape.layers.iter().enumerate().rev() {
        let out_c = cfg.conv_blocks[idx].out_channels;
        let l = lt.geom.cols();
        let dz: Vec<f64> = dact
            .iter()
            .zip(&lt.pre_act)
            .map(|(d, &z)| d * silu_grad(z))
            .collect();
        let g = &mut grads.layers[idx];
        for (oc, row) in dz.chunks_exact(l).enumerate() {
            g.bias[oc] = row.iter().sum();
        }
        // dW = dZ * cols^T
        gemm(out_c, l, lt.geom.rows(), &dz, false, &lt.cols, true, &mut g.weight, 0.0);
        if idx > 0 {
            // dcols = W^T * dZ
            let mut dcols = vec![0.0; lt.geom.rows() * l];
            gemm(lt.geom.rows(), out_c, l, &params.layers[idx].weight, true, &dz, false, &mut dcols, 0.0);
            dact = col2im(&dcols, &lt.geom);
        }
    }
    Ok(grads)
}

/// Recomputes the forward pass and backpropagates `upstream` (the gradient of
/// the loss with respect to the projected embedding).
pub fn backward(params: &EncoderParams, img: &Image, upstream: &[f64]) -> Result<ParamGrads> {
    let (_, tape) = forward_with_tape(params, img)?;
    backward_from_tape(params, &tape, upstream)
}
