//! Single- and multi-scale structural similarity on luminance.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filter;
use crate::imaging::{to_luma, Image};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SsimConfig {
    pub window: usize,
    pub sigma: f64,
    pub k1: f64,
    pub k2: f64,
}

impl Default for SsimConfig {
    fn default() -> Self {
        Self {
            window: 11,
            sigma: 1.5,
            k1: 0.01,
            k2: 0.03,
        }
    }
}

impl SsimConfig {
    pub fn c1(&self) -> f64 {
        self.k1 * self.k1
    }

    pub fn c2(&self) -> f64 {
        self.k2 * self.k2
    }
}

pub const MS_SSIM_WEIGHTS: [f64; 5] = [0.0448, 0.2856, 0.3001, 0.2363, 0.1333];

/// Mean SSIM and mean contrast-structure term over the valid window positions.
pub(crate) fn ssim_components(a: &[f64], b: &[f64], h: usize, w: usize, cfg: &SsimConfig) -> (f64, f64) {
    let taps = filter::gaussian_taps(cfg.sigma, cfg.window / 2);
    let (mu_a, oh, ow) = filter::separable_valid(a, h, w, &taps);
    let (mu_b, ..) = filter::separable_valid(b, h, w, &taps);
    let sq = |x: &[f64], y: &[f64]| -> Vec<f64> { x.iter().zip(y).map(|(p, q)| p * q).collect() };
    let (e_aa, ..) = filter::separable_valid(&sq(a, a), h, w, &taps);
    let (e_bb, ..) = filter::separable_valid(&sq(b, b), h, w, &taps);
    let (e_ab, ..) = filter::separable_valid(&sq(a, b), h, w, &taps);
    let (c1, c2) = (cfg.c1(), cfg.c2());
    let (mut ssim_sum, mut cs_sum) = (0.0, 0.0);
    for i in 0..oh * ow {
        let (ma, mb) = (mu_a[i], mu_b[i]);
        let var_a = e_aa[i] - ma * ma;
        let var_b = e_bb[i] - mb * mb;
        let cov = e_ab[i] - ma * mb;
        let cs = (2.0 * cov + c2) / (var_a + var_b + c2);
        let l = (2.0 * ma * mb + c1) / (ma * ma + mb * mb + c1);
        ssim_sum += l * cs;
        cs_sum += cs;
    }
    let n = (oh * ow) as f64;
    (ssim_sum / n, cs_sum / n)
}

fn luma_planes(a: &Image, b: &Image, min_side: usize, what: &str) -> Result<(Vec<f64>, Vec<f64>, usize, usize)> {
    if a.height() != b.height() || a.width() != b.width() {
        return Err(Error::Dimension(format!(
            "{}x{} vs {}x{}",
            a.height(),
            a.width(),
            b.height(),
            b.width()
        )));
    }
    let (h, w) = (a.height(), a.width());
    if h < min_side || w < min_side {
        return Err(Error::TooSmall(format!("{h}x{w} image is below the {min_side}-pixel minimum for {what}")));
    }
    Ok((to_luma(a)?.into_data(), to_luma(b)?.into_data(), h, w))
}

pub fn ssim(a: &Image, b: &Image) -> Result<f64> {
    ssim_with(a, b, &SsimConfig::default())
}

/// Mean local SSIM of the luminance planes. Color inputs are converted with [`to_luma`].
pub fn ssim_with(a: &Image, b: &Image, cfg: &SsimConfig) -> Result<f64> {
    let (pa, pb, h, w) = luma_planes(a, b, cfg.window, "SSIM")?;
    Ok(ssim_components(&pa, &pb, h, w, cfg).0)
}

pub fn ms_ssim(a: &Image, b: &Image) -> Result<f64> {
    ms_ssim_with(a, b, &SsimConfig::default())
}

/// Five-scale MS-SSIM. Contrast-structure terms of the first four scales and
/// the full SSIM of the coarsest scale are raised to the standard weights;
/// negative per-scale terms are clamped to zero before exponentiation.
pub fn ms_ssim_with(a: &Image, b: &Image, cfg: &SsimConfig) -> Result<f64> {
    let scales = MS_SSIM_WEIGHTS.len();
    let min_side = cfg.window << (scales - 1);
    let (mut pa, mut pb, mut h, mut w) = luma_planes(a, b, min_side, "MS-SSIM")?;
    let mut score = 1.0;
    for (s, weight) in MS_SSIM_WEIGHTS.iter().enumerate() {
        let (ssim, cs) = ssim_components(&pa, &pb, h, w, cfg);
        let term = if s + 1 == scales { ssim } else { cs };
        score *= term.max(0.0).powf(*weight);
        if s + 1 < scales {
            let (da, dh, dw) = filter::downsample2(&pa, h, w);
            let (db, ..) = filter::downsample2(&pb, h, w);
            pa = da;
            pb = db;
            h = dh;
            w = dw;
        }
    }
    Ok(score)
}
