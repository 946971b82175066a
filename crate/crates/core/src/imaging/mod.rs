//! Pixel-space inputs: decoding, luminance, the synthetic distortion bank,
//! fragment sampling and patch extraction.

mod distort;
mod fragment;
mod image;

pub use self::distort::{
    additive_noise, block_dct_compress, desaturate, distort, gaussian_blur, DistortionKind, DistortionSpec,
    BLUR_SIGMA, COMPRESSION_QUALITY, NOISE_SIGMA, SATURATION_FACTOR,
};
pub use self::fragment::{extract_patches, fragment, FragmentPlan, DEFAULT_GRID, DEFAULT_MINIPATCH};
pub use self::image::{load_image, to_luma, Image, LUMA_WEIGHTS};

use crate::error::Result;
use crate::frmetrics::SimilarityMeasure;
use crate::rng;

/// One scene with its distorted versions and their pairwise similarity weights.
#[derive(Debug, Clone)]
pub struct DistortedSet {
    pub source: Image,
    pub versions: Vec<Image>,
    pub specs: Vec<DistortionSpec>,
    /// Symmetric `D x D`; the diagonal is not used.
    pub weights: Vec<Vec<f64>>,
}

/// Generates the eight distorted versions of `img` in [`DistortionSpec::all`] order.
pub fn distorted_versions(img: &Image, seed: u64) -> Result<(Vec<DistortionSpec>, Vec<Image>)> {
    let specs = DistortionSpec::all();
    let versions = specs
        .iter()
        .enumerate()
        .map(|(j, spec)| distort(img, *spec, rng::derive_seed(seed, j as u64, "distortion")))
        .collect::<Result<Vec<_>>>()?;
    Ok((specs, versions))
}

/// Builds the distorted set; weights are computed on the full versions.
pub fn make_distorted_set(img: &Image, measure: &SimilarityMeasure, seed: u64) -> Result<DistortedSet> {
    let (specs, versions) = distorted_versions(img, seed)?;
    let weights = measure.pairwise_weights(&versions)?;
    Ok(DistortedSet {
        source: img.clone(),
        versions,
        specs,
        weights,
    })
}
