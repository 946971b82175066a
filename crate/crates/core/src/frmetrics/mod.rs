//! Full-reference perceptual similarity measures mapped into `[0, 1]`.

mod fsim;
mod gmsd;
mod phase;
mod ssim;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use fsim::{fsim, fsim_from_features, fsim_with, FsimConfig, FsimFeatures};
pub use gmsd::{gmsd, gmsd_with, GMSD_C};
pub use phase::{
    phase_congruency, phase_congruency_with, LogGaborBank, PhaseCongruencyConfig, PhaseCongruencyMap,
};
pub use ssim::{ms_ssim, ms_ssim_with, ssim, ssim_with, SsimConfig, MS_SSIM_WEIGHTS};

use crate::error::{Error, Result};
use crate::imaging::Image;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MeasureKind {
    Ssim,
    MsSsim,
    Gmsd,
    Fsim,
    /// No similarity: every pair weighs zero, reducing the loss to InfoNCE.
    None,
}

impl MeasureKind {
    pub const ALL: [MeasureKind; 5] = [
        MeasureKind::Ssim,
        MeasureKind::MsSsim,
        MeasureKind::Gmsd,
        MeasureKind::Fsim,
        MeasureKind::None,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MeasureKind::Ssim => "ssim",
            MeasureKind::MsSsim => "ms-ssim",
            MeasureKind::Gmsd => "gmsd",
            MeasureKind::Fsim => "fsim",
            MeasureKind::None => "none",
        }
    }
}

impl fmt::Display for MeasureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MeasureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.to_ascii_lowercase().replace('_', "-");
        MeasureKind::ALL
            .into_iter()
            .find(|k| k.name() == norm || (norm == "msssim" && *k == MeasureKind::MsSsim))
            .ok_or_else(|| Error::InvalidArgument(format!("unknown similarity measure '{s}'")))
    }
}

/// A selected measure together with its constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimilarityMeasure {
    pub kind: MeasureKind,
    pub ssim: SsimConfig,
    pub gmsd_c: f64,
    /// Decay of the GMSD-to-similarity mapping `exp(-gamma * gmsd)`.
    pub gmsd_gamma: f64,
    pub fsim: FsimConfig,
}

impl Default for SimilarityMeasure {
    fn default() -> Self {
        Self::new(MeasureKind::Fsim)
    }
}

impl SimilarityMeasure {
    pub fn new(kind: MeasureKind) -> Self {
        Self {
            kind,
            ssim: SsimConfig::default(),
            gmsd_c: GMSD_C,
            gmsd_gamma: 10.0,
            fsim: FsimConfig::default(),
        }
    }

    /// Raw score of the underlying measure (`0` for `None`).
    pub fn score(&self, a: &Image, b: &Image) -> Result<f64> {
        a.check_same_shape(b)?;
        match self.kind {
            MeasureKind::Ssim => ssim_with(a, b, &self.ssim),
            MeasureKind::MsSsim => ms_ssim_with(a, b, &self.ssim),
            MeasureKind::Gmsd => gmsd_with(a, b, self.gmsd_c),
            MeasureKind::Fsim => fsim_with(a, b, &self.fsim),
            MeasureKind::None => Ok(0.0),
        }
    }

    /// Maps a raw score into `[0, 1]`.
    pub fn to_weight(&self, score: f64) -> f64 {
        match self.kind {
            MeasureKind::Gmsd => (-self.gmsd_gamma * score.max(0.0)).exp(),
            MeasureKind::None => 0.0,
            _ => score.clamp(0.0, 1.0),
        }
    }

    pub fn weight(&self, a: &Image, b: &Image) -> Result<f64> {
        Ok(self.to_weight(self.score(a, b)?))
    }

    /// Symmetric `n x n` weight matrix over a set of same-size images; the
    /// diagonal is set to 1 and is not used by the loss.
    pub fn pairwise_weights(&self, images: &[Image]) -> Result<Vec<Vec<f64>>> {
        let n = images.len();
        let mut out = vec![vec![0.0; n]; n];
        let fsim_features = if self.kind == MeasureKind::Fsim {
            Some(
                images
                    .iter()
                    .map(|img| FsimFeatures::compute(img, &self.fsim))
                    .collect::<Result<Vec<_>>>()?,
            )
        } else {
            None
        };
        for j in 0..n {
            out[j][j] = 1.0;
            for k in j + 1..n {
                images[j].check_same_shape(&images[k])?;
                let w = match &fsim_features {
                    Some(f) => self.to_weight(fsim_from_features(&f[j], &f[k], &self.fsim)?),
                    None => self.weight(&images[j], &images[k])?,
                };
                out[j][k] = w;
                out[k][j] = w;
            }
        }
        Ok(out)
    }
}

/// `s(a, b)` in `[0, 1]` under the given measure.
pub fn similarity_weight(a: &Image, b: &Image, m: &SimilarityMeasure) -> Result<f64> {
    m.weight(a, b)
}
