//! Synthetic distortion bank: Gaussian blur, block-DCT compression, additive
//! Gaussian noise and desaturation, each at two severities.

use std::fmt;
use std::str::FromStr;

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::image::{Image, LUMA_WEIGHTS};
use crate::error::{Error, Result};
use crate::filter;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistortionKind {
    Blur,
    Compression,
    Noise,
    Saturation,
}

impl DistortionKind {
    pub const ALL: [DistortionKind; 4] = [
        DistortionKind::Blur,
        DistortionKind::Compression,
        DistortionKind::Noise,
        DistortionKind::Saturation,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DistortionKind::Blur => "blur",
            DistortionKind::Compression => "compression",
            DistortionKind::Noise => "noise",
            DistortionKind::Saturation => "saturation",
        }
    }
}

impl fmt::Display for DistortionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DistortionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        DistortionKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidArgument(format!("unknown distortion kind '{s}'")))
    }
}

/// A distortion kind at severity level 1 (mild) or 2 (strong).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DistortionSpec {
    kind: DistortionKind,
    level: u8,
}

pub const BLUR_SIGMA: [f64; 2] = [1.5, 3.0];
pub const COMPRESSION_QUALITY: [u32; 2] = [30, 10];
pub const NOISE_SIGMA: [f64; 2] = [0.05, 0.10];
pub const SATURATION_FACTOR: [f64; 2] = [0.5, 0.75];

impl DistortionSpec {
    pub fn new(kind: DistortionKind, level: u8) -> Result<Self> {
        if level == 1 || level == 2 {
            Ok(Self { kind, level })
        } else {
            Err(Error::InvalidArgument(format!(
                "distortion level must be 1 or 2, got {level}"
            )))
        }
    }

    /// All `4 x 2` specs in kind-major order.
    pub fn all() -> Vec<DistortionSpec> {
        DistortionKind::ALL
            .into_iter()
            .flat_map(|kind| [1, 2].map(|level| DistortionSpec { kind, level }))
            .collect()
    }

    pub fn kind(&self) -> DistortionKind {
        self.kind
    }

    pub fn level(&self) -> u8 {
        self.level
    }

    fn idx(&self) -> usize {
        usize::from(self.level - 1)
    }
}

impl fmt::Display for DistortionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.kind, self.level)
    }
}

/// Applies one distortion. Output has the input's shape and stays in `[0, 1]`;
/// the result is a pure function of `(img, spec, seed)`.
pub fn distort(img: &Image, spec: DistortionSpec, seed: u64) -> Result<Image> {
    match spec.kind {
        DistortionKind::Blur => gaussian_blur(img, BLUR_SIGMA[spec.idx()]),
        DistortionKind::Compression => block_dct_compress(img, COMPRESSION_QUALITY[spec.idx()]),
        DistortionKind::Noise => additive_noise(img, NOISE_SIGMA[spec.idx()], seed),
        DistortionKind::Saturation => desaturate(img, SATURATION_FACTOR[spec.idx()]),
    }
}

pub fn gaussian_blur(img: &Image, sigma: f64) -> Result<Image> {
    let radius = (3.0 * sigma).ceil() as usize;
    let support = 2 * radius + 1;
    if img.height() < support || img.width() < support {
        return Err(Error::TooSmall(format!(
            "{}x{} image is smaller than the {support}-pixel blur kernel",
            img.height(),
            img.width()
        )));
    }
    let taps = filter::gaussian_taps(sigma, radius);
    let (h, w, c) = (img.height(), img.width(), img.channels());
    let planes: Vec<Vec<f64>> = (0..c)
        .map(|ch| filter::separable_same_replicate(&img.plane(ch), h, w, &taps))
        .collect();
    Image::from_clamped(h, w, c, interleave(&planes))
}

pub fn additive_noise(img: &Image, sigma: f64, seed: u64) -> Result<Image> {
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let mut rng = rng::stream(seed, 0, "noise");
    let data = img.data().iter().map(|v| v + normal.sample(&mut rng)).collect();
    Image::from_clamped(img.height(), img.width(), img.channels(), data)
}

/// Moves every pixel toward its own luma by `factor`; grayscale input is returned unchanged.
pub fn desaturate(img: &Image, factor: f64) -> Result<Image> {
    if img.channels() == 1 {
        return Ok(img.clone());
    }
    let mut data = Vec::with_capacity(img.data().len());
    for p in img.data().chunks_exact(3) {
        let y = LUMA_WEIGHTS[0] * p[0] + LUMA_WEIGHTS[1] * p[1] + LUMA_WEIGHTS[2] * p[2];
        data.extend(p.iter().map(|&v| v + factor * (y - v)));
    }
    Image::from_clamped(img.height(), img.width(), 3, data)
}

const LUMA_QTABLE: [u16; 64] = [
    16, 11, 10, 16, 24, 40, 51, 61, 12, 12, 14, 19, 26, 58, 60, 55, 14, 13, 16, 24, 40, 57, 69, 56,
    14, 17, 22, 29, 51, 87, 80, 62, 18, 22, 37, 56, 68, 109, 103, 77, 24, 35, 55, 64, 81, 104, 113,
    92, 49, 64, 78, 87, 103, 121, 120, 101, 72, 92, 95, 98, 112, 100, 103, 99,
];

const CHROMA_QTABLE: [u16; 64] = [
    17, 18, 24, 47, 99, 99, 99, 99, 18, 21, 26, 66, 99, 99, 99, 99, 24, 26, 56, 99, 99, 99, 99, 99,
    47, 66, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99,
    99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99,
];

/// IJG quality scaling of a base quantization table.
fn scaled_table(base: &[u16; 64], quality: u32) -> [f64; 64] {
    let q = quality.clamp(1, 100);
    let scale = if q < 50 { 5000 / q } else { 200 - 2 * q };
    let mut out = [0.0; 64];
    for (o, &b) in out.iter_mut().zip(base) {
        *o = ((u32::from(b) * scale + 50) / 100).clamp(1, 255) as f64;
    }
    out
}

fn dct_basis() -> [[f64; 8]; 8] {
    let mut m = [[0.0; 8]; 8];
    for (u, row) in m.iter_mut().enumerate() {
        let cu = if u == 0 { (1.0f64 / 8.0).sqrt() } else { (2.0f64 / 8.0).sqrt() };
        for (x, v) in row.iter_mut().enumerate() {
            *v = cu * (((2 * x + 1) as f64 * u as f64 * std::f64::consts::PI) / 16.0).cos();
        }
    }
    m
}

/// Quantizes one plane (0..255 scale) in 8x8 blocks with edge-replicated padding.
fn quantize_plane(plane: &[f64], h: usize, w: usize, table: &[f64; 64], basis: &[[f64; 8]; 8]) -> Vec<f64> {
    let mut out = vec![0.0; h * w];
    let mut block = [[0.0; 8]; 8];
    let mut tmp = [[0.0; 8]; 8];
    for by in (0..h).step_by(8) {
        for bx in (0..w).step_by(8) {
            for (y, row) in block.iter_mut().enumerate() {
                let sy = (by + y).min(h - 1);
                for (x, v) in row.iter_mut().enumerate() {
                    *v = plane[sy * w + (bx + x).min(w - 1)] - 128.0;
                }
            }
            // forward: C * B * C^T
            for u in 0..8 {
                for x in 0..8 {
                    tmp[u][x] = (0..8).map(|y| basis[u][y] * block[y][x]).sum();
                }
            }
            for u in 0..8 {
                for v in 0..8 {
                    let coef: f64 = (0..8).map(|x| tmp[u][x] * basis[v][x]).sum();
                    let q = table[u * 8 + v];
                    block[u][v] = (coef / q).round() * q;
                }
            }
            // inverse: C^T * Q * C
            for y in 0..8 {
                for v in 0..8 {
                    tmp[y][v] = (0..8).map(|u| basis[u][y] * block[u][v]).sum();
                }
            }
            for y in 0..8 {
                if by + y >= h {
                    break;
                }
                for x in 0..8 {
                    if bx + x >= w {
                        break;
                    }
                    let val: f64 = (0..8).map(|v| tmp[y][v] * basis[v][x]).sum();
                    out[(by + y) * w + bx + x] = val + 128.0;
                }
            }
        }
    }
    out
}

/// JPEG-like compression: YCbCr conversion, 8x8 block DCT, quantization with the
/// standard tables scaled to `quality`, and reconstruction.
pub fn block_dct_compress(img: &Image, quality: u32) -> Result<Image> {
    let (h, w) = (img.height(), img.width());
    let basis = dct_basis();
    let luma_q = scaled_table(&LUMA_QTABLE, quality);
    if img.channels() == 1 {
        let plane: Vec<f64> = img.data().iter().map(|v| v * 255.0).collect();
        let out = quantize_plane(&plane, h, w, &luma_q, &basis);
        return Image::from_clamped(h, w, 1, out.into_iter().map(|v| v / 255.0).collect());
    }
    let chroma_q = scaled_table(&CHROMA_QTABLE, quality);
    let n = h * w;
    let (mut y, mut cb, mut cr) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
    for p in img.data().chunks_exact(3) {
        let (r, g, b) = (p[0] * 255.0, p[1] * 255.0, p[2] * 255.0);
        y.push(0.299 * r + 0.587 * g + 0.114 * b);
        cb.push(-0.168_736 * r - 0.331_264 * g + 0.5 * b + 128.0);
        cr.push(0.5 * r - 0.418_688 * g - 0.081_312 * b + 128.0);
    }
    let y = quantize_plane(&y, h, w, &luma_q, &basis);
    let cb = quantize_plane(&cb, h, w, &chroma_q, &basis);
    let cr = quantize_plane(&cr, h, w, &chroma_q, &basis);
    let mut data = Vec::with_capacity(3 * n);
    for i in 0..n {
        let (yy, b, r) = (y[i], cb[i] - 128.0, cr[i] - 128.0);
        data.push((yy + 1.402 * r) / 255.0);
        data.push((yy - 0.344_136 * b - 0.714_136 * r) / 255.0);
        data.push((yy + 1.772 * b) / 255.0);
    }
    Image::from_clamped(h, w, 3, data)
}

fn interleave(planes: &[Vec<f64>]) -> Vec<f64> {
    let c = planes.len();
    let n = planes[0].len();
    let mut out = vec![0.0; n * c];
    for (ch, p) in planes.iter().enumerate() {
        for (i, v) in p.iter().enumerate() {
            out[i * c + ch] = *v;
        }
    }
    out
}
