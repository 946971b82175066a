//! Feature similarity (FSIM) from phase congruency and Scharr gradient
//! magnitude, with the chromatic extension applied to color pairs.

use serde::{Deserialize, Serialize};

use super::phase::{check_size, phase_congruency_plane, PhaseCongruencyConfig};
use crate::error::{Error, Result};
use crate::filter;
use crate::imaging::{to_luma, Image};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FsimConfig {
    /// Phase-congruency stabilizer.
    pub t1: f64,
    /// Gradient stabilizer on unit-range intensities (160 on the 8-bit scale).
    pub t2: f64,
    /// Chrominance stabilizer for the I and Q channels (200 on the 8-bit scale).
    pub t3: f64,
    /// Exponent of the chrominance similarity.
    pub lambda: f64,
    /// Use the I/Q chrominance term when both inputs are RGB.
    pub chromatic: bool,
    pub phase: PhaseCongruencyConfig,
}

impl Default for FsimConfig {
    fn default() -> Self {
        Self {
            t1: 0.85,
            t2: 160.0 / (255.0 * 255.0),
            t3: 200.0 / (255.0 * 255.0),
            lambda: 0.03,
            chromatic: true,
            phase: PhaseCongruencyConfig::default(),
        }
    }
}

const SCHARR_X: [[f64; 3]; 3] = [
    [3.0 / 16.0, 0.0, -3.0 / 16.0],
    [10.0 / 16.0, 0.0, -10.0 / 16.0],
    [3.0 / 16.0, 0.0, -3.0 / 16.0],
];
const SCHARR_Y: [[f64; 3]; 3] = [
    [3.0 / 16.0, 10.0 / 16.0, 3.0 / 16.0],
    [0.0, 0.0, 0.0],
    [-3.0 / 16.0, -10.0 / 16.0, -3.0 / 16.0],
];

/// Per-image quantities FSIM needs; computing these once per image lets a
/// whole set of pairwise comparisons share the filter-bank work.
#[derive(Debug, Clone)]
pub struct FsimFeatures {
    height: usize,
    width: usize,
    pc: Vec<f64>,
    gradient: Vec<f64>,
    chroma: Option<(Vec<f64>, Vec<f64>)>,
}

impl FsimFeatures {
    pub fn compute(img: &Image, cfg: &FsimConfig) -> Result<Self> {
        let (h, w) = (img.height(), img.width());
        check_size(h, w)?;
        let luma = to_luma(img)?;
        let scaled: Vec<f64> = luma.data().iter().map(|v| v * 255.0).collect();
        let pc = phase_congruency_plane(&scaled, h, w, &cfg.phase);
        let gx = filter::correlate3_same_zero(luma.data(), h, w, &SCHARR_X);
        let gy = filter::correlate3_same_zero(luma.data(), h, w, &SCHARR_Y);
        let gradient = gx.iter().zip(&gy).map(|(x, y)| (x * x + y * y).sqrt()).collect();
        let chroma = (cfg.chromatic && img.channels() == 3).then(|| {
            img.data()
                .chunks_exact(3)
                .map(|p| {
                    (
                        0.596 * p[0] - 0.274 * p[1] - 0.322 * p[2],
                        0.211 * p[0] - 0.523 * p[1] + 0.312 * p[2],
                    )
                })
                .unzip()
        });
        Ok(Self {
            height: h,
            width: w,
            pc,
            gradient,
            chroma,
        })
    }

    pub fn phase_congruency(&self) -> &[f64] {
        &self.pc
    }
}

/// `Re(x^p)` with the principal branch, so negative bases stay real-valued.
fn real_pow(x: f64, p: f64) -> f64 {
    if x >= 0.0 {
        x.powf(p)
    } else {
        (-x).powf(p) * (p * std::f64::consts::PI).cos()
    }
}

pub fn fsim_from_features(a: &FsimFeatures, b: &FsimFeatures, cfg: &FsimConfig) -> Result<f64> {
    if a.height != b.height || a.width != b.width {
        return Err(Error::Dimension(format!(
            "{}x{} vs {}x{}",
            a.height, a.width, b.height, b.width
        )));
    }
    let chroma = match (&a.chroma, &b.chroma) {
        (Some(ca), Some(cb)) => Some((ca, cb)),
        _ => None,
    };
    let (mut num, mut den, mut plain) = (0.0, 0.0, 0.0);
    for i in 0..a.pc.len() {
        let (p1, p2) = (a.pc[i], b.pc[i]);
        let (g1, g2) = (a.gradient[i], b.gradient[i]);
        let s_pc = (2.0 * p1 * p2 + cfg.t1) / (p1 * p1 + p2 * p2 + cfg.t1);
        let s_g = (2.0 * g1 * g2 + cfg.t2) / (g1 * g1 + g2 * g2 + cfg.t2);
        let mut s = s_pc * s_g;
        if let Some(((i1, q1), (i2, q2))) = chroma {
            let s_i = (2.0 * i1[i] * i2[i] + cfg.t3) / (i1[i] * i1[i] + i2[i] * i2[i] + cfg.t3);
            let s_q = (2.0 * q1[i] * q2[i] + cfg.t3) / (q1[i] * q1[i] + q2[i] * q2[i] + cfg.t3);
            s *= real_pow(s_i * s_q, cfg.lambda);
        }
        let pcm = p1.max(p2);
        num += s * pcm;
        den += pcm;
        plain += s;
    }
    // Structureless pairs carry no phase-congruency weight; fall back to the plain mean.
    if den <= 1e-12 {
        return Ok(plain / a.pc.len() as f64);
    }
    Ok(num / den)
}

pub fn fsim(a: &Image, b: &Image) -> Result<f64> {
    fsim_with(a, b, &FsimConfig::default())
}

/// FSIM of two same-size images (minimum side 32). RGB pairs use the
/// chromatic variant unless disabled in `cfg`; otherwise luminance only.
pub fn fsim_with(a: &Image, b: &Image, cfg: &FsimConfig) -> Result<f64> {
    if a.height() != b.height() || a.width() != b.width() {
        return Err(Error::Dimension(format!(
            "{}x{} vs {}x{}",
            a.height(),
            a.width(),
            b.height(),
            b.width()
        )));
    }
    let fa = FsimFeatures::compute(a, cfg)?;
    let fb = FsimFeatures::compute(b, cfg)?;
    fsim_from_features(&fa, &fb, cfg)
}
