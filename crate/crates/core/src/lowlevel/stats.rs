//! Pristine-corpus statistics, the Mahalanobis-type distance and `Q_L`.

use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::imaging::{extract_patches, Image};
use crate::nnet::{forward, io::config_hash, EncoderParams};

pub const DEFAULT_PATCH_SIDE: usize = 96;
pub const DEFAULT_K1: f64 = 0.01;
/// Relative ridge added to an ill-conditioned average covariance.
pub const COV_EPS: f64 = 1e-6;

pub const STATS_MAGIC: &[u8; 4] = b"NRQS";
pub const STATS_VERSION: u32 = 1;

/// Mean and covariance of backbone features over a pristine patch corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct PristineStats {
    pub mu: Vec<f64>,
    /// `dim x dim`, row-major.
    pub sigma: Vec<f64>,
    pub patch_side: usize,
    pub count: usize,
}

impl PristineStats {
    pub fn dim(&self) -> usize {
        self.mu.len()
    }
}

/// Backbone features of every non-overlapping `side x side` patch of `img`.
pub fn patch_features(params: &EncoderParams, img: &Image, side: usize) -> Result<Vec<Vec<f64>>> {
    extract_patches(img, side, side)?
        .iter()
        .map(|p| Ok(forward(params, p)?.backbone))
        .collect()
}

/// Sample mean and covariance (`n - 1` normalization; zero for a single sample).
pub fn mean_cov(features: &[Vec<f64>]) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = features.len();
    let Some(first) = features.first() else {
        return Err(Error::InsufficientData("no feature vectors".into()));
    };
    let dim = first.len();
    if features.iter().any(|f| f.len() != dim) {
        return Err(Error::Dimension("feature vectors differ in length".into()));
    }
    let mut mu = vec![0.0; dim];
    for f in features {
        for (m, v) in mu.iter_mut().zip(f) {
            *m += v;
        }
    }
    mu.iter_mut().for_each(|m| *m /= n as f64);
    let mut sigma = vec![0.0; dim * dim];
    if n > 1 {
        for f in features {
            for a in 0..dim {
                let da = f[a] - mu[a];
                for b in a..dim {
                    sigma[a * dim + b] += da * (f[b] - mu[b]);
                }
            }
        }
        for a in 0..dim {
            for b in a..dim {
                let v = sigma[a * dim + b] / (n - 1) as f64;
                sigma[a * dim + b] = v;
                sigma[b * dim + a] = v;
            }
        }
    }
    Ok((mu, sigma))
}

pub fn compute_pristine_stats(params: &EncoderParams, pristine: &[Image], side: usize) -> Result<PristineStats> {
    if side == 0 {
        return Err(Error::InvalidArgument("patch side must be positive".into()));
    }
    let per_image: Vec<Vec<Vec<f64>>> = pristine
        .par_iter()
        .map(|img| patch_features(params, img, side))
        .collect::<Result<_>>()?;
    let features: Vec<Vec<f64>> = per_image.into_iter().flatten().collect();
    let need = params.config().backbone_dim() + 1;
    if features.len() < need {
        return Err(Error::InsufficientData(format!(
            "{} pristine patches of side {side}, need at least {need}",
            features.len()
        )));
    }
    let (mu, sigma) = mean_cov(&features)?;
    Ok(PristineStats {
        mu,
        sigma,
        patch_side: side,
        count: features.len(),
    })
}

/// `sqrt(dmu^T ((sigma_p + sigma_d) / 2)^-1 dmu)`.
///
/// The average covariance receives a ridge of `COV_EPS * trace / dim` only
/// when its smallest eigenvalue is below `COV_EPS` times the mean eigenvalue.
pub fn mahalanobis(mu_p: &[f64], sigma_p: &[f64], mu_d: &[f64], sigma_d: &[f64]) -> Result<f64> {
    let dim = mu_p.len();
    if mu_d.len() != dim || sigma_p.len() != dim * dim || sigma_d.len() != dim * dim || dim == 0 {
        return Err(Error::Dimension(format!(
            "distance inputs disagree: mean lengths {} and {}, covariance sizes {} and {}",
            dim,
            mu_d.len(),
            sigma_p.len(),
            sigma_d.len()
        )));
    }
    let mut a = DMatrix::from_fn(dim, dim, |r, c| {
        let i = r * dim + c;
        let j = c * dim + r;
        0.25 * (sigma_p[i] + sigma_p[j] + sigma_d[i] + sigma_d[j])
    });
    let eig = a.clone().symmetric_eigenvalues();
    let mean_eig = eig.sum() / dim as f64;
    let min_eig = eig.min();
    if !(min_eig >= COV_EPS * mean_eig) || mean_eig <= 0.0 {
        let scale = if mean_eig > 0.0 { mean_eig } else { 1.0 };
        for i in 0..dim {
            a[(i, i)] += COV_EPS * scale;
        }
    }
    let diff = DVector::from_iterator(dim, mu_p.iter().zip(mu_d).map(|(p, d)| p - d));
    let chol = a
        .cholesky()
        .ok_or_else(|| Error::Numeric("average covariance is singular after regularization".into()))?;
    let x = chol.solve(&diff);
    let q = diff.dot(&x);
    if !q.is_finite() {
        return Err(Error::Numeric(format!("distance is {q}")));
    }
    Ok(q.max(0.0).sqrt())
}

/// Distance of `img`'s patch statistics from the pristine statistics.
pub fn lowlevel_distance(params: &EncoderParams, stats: &PristineStats, img: &Image) -> Result<f64> {
    let feats = patch_features(params, img, stats.patch_side)?;
    let (mu_d, sigma_d) = mean_cov(&feats)?;
    if mu_d.len() != stats.dim() {
        return Err(Error::Dimension(format!(
            "encoder backbone has {} features, statistics have {}",
            mu_d.len(),
            stats.dim()
        )));
    }
    mahalanobis(&stats.mu, &stats.sigma, &mu_d, &sigma_d)
}

/// `1 / (1 + exp(k1 d))`.
pub fn q_low(d: f64, k1: f64) -> f64 {
    1.0 / (1.0 + (k1 * d).exp())
}

/// Writes statistics tied to the encoder configuration that produced them.
pub fn save_stats(stats: &PristineStats, params: &EncoderParams, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let dim = stats.dim();
    let mut buf = Vec::with_capacity(40 + 8 * dim * (dim + 1));
    buf.extend_from_slice(STATS_MAGIC);
    buf.extend_from_slice(&STATS_VERSION.to_le_bytes());
    buf.extend_from_slice(&config_hash(params.config()).to_le_bytes());
    for v in [stats.patch_side, stats.count, dim] {
        buf.extend_from_slice(&(v as u64).to_le_bytes());
    }
    for v in stats.mu.iter().chain(&stats.sigma) {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}

pub fn load_stats(path: impl AsRef<Path>, params: &EncoderParams) -> Result<PristineStats> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    const HEADER: usize = 4 + 4 + 8 + 24;
    if bytes.len() < HEADER {
        return Err(Error::corrupt(path, "truncated header"));
    }
    if &bytes[..4] != STATS_MAGIC {
        return Err(Error::corrupt(path, "not a statistics file"));
    }
    let u64_at = |o: usize| u64::from_le_bytes(bytes[o..o + 8].try_into().expect("8 bytes"));
    let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
    if version != STATS_VERSION {
        return Err(Error::Version {
            path: path.to_path_buf(),
            found: version,
            expected: STATS_VERSION,
        });
    }
    if u64_at(8) != config_hash(params.config()) {
        return Err(Error::ConfigMismatch {
            path: path.to_path_buf(),
        });
    }
    let (patch_side, count, dim) = (u64_at(16) as usize, u64_at(24) as usize, u64_at(32) as usize);
    if dim != params.config().backbone_dim() {
        return Err(Error::corrupt(path, format!("dimension {dim} does not match the encoder")));
    }
    if bytes.len() != HEADER + 8 * dim * (dim + 1) {
        return Err(Error::corrupt(path, "payload length does not match the header"));
    }
    let values: Vec<f64> = bytes[HEADER..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::corrupt(path, "non-finite value"));
    }
    Ok(PristineStats {
        mu: values[..dim].to_vec(),
        sigma: values[dim..].to_vec(),
        patch_side,
        count,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nnet::{init_encoder, EncoderConfig};
    use crate::synth;

    fn identity(n: usize) -> Vec<f64> {
        (0..n * n).map(|i| if i % (n + 1) == 0 { 1.0 } else { 0.0 }).collect()
    }

    #[test]
    fn euclidean_reduction_and_identity() {
        let i4 = identity(4);
        let d = mahalanobis(&[1.0, 0.0, 0.0, 0.0], &i4, &[0.0; 4], &i4).unwrap();
        assert!((d - 1.0).abs() < 1e-12);
        let d = mahalanobis(&[0.3, 0.1, 0.0, 2.0], &i4, &[0.3, 0.1, 0.0, 2.0], &i4).unwrap();
        assert_eq!(d, 0.0);
    }

    #[test]
    fn zero_covariances_are_regularized() {
        let z = vec![0.0; 9];
        let d = mahalanobis(&[1.0, 0.0, 0.0], &z, &[0.0; 3], &z).unwrap();
        assert!(d.is_finite() && d > 1.0);
    }

    #[test]
    fn mean_cov_of_identical_rows() {
        let f = vec![vec![1.0, 2.0, 3.0]; 5];
        let (mu, s) = mean_cov(&f).unwrap();
        assert_eq!(mu, vec![1.0, 2.0, 3.0]);
        assert!(s.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn q_low_bounds() {
        assert_eq!(q_low(0.0, 0.01), 0.5);
        assert!(q_low(1e6, 0.01) < 1e-3);
        assert!(q_low(3.0, 0.01) > q_low(4.0, 0.01));
    }

    #[test]
    fn stats_file_round_trip() {
        let cfg = EncoderConfig {
            conv_blocks: vec![crate::nnet::ConvSpec {
                out_channels: 4,
                kernel: 3,
                stride: 2,
            }],
            projection_dim: 4,
            ..EncoderConfig::default()
        };
        let params = init_encoder(&cfg).unwrap();
        let imgs = vec![synth::scene(64, 64, 1), synth::scene(64, 64, 2)];
        let stats = compute_pristine_stats(&params, &imgs, 32).unwrap();
        assert_eq!(stats.count, 8);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.bin");
        save_stats(&stats, &params, &path).unwrap();
        assert_eq!(load_stats(&path, &params).unwrap(), stats);
        let other = init_encoder(&EncoderConfig {
            projection_dim: 5,
            ..cfg
        })
        .unwrap();
        assert!(matches!(load_stats(&path, &other), Err(Error::ConfigMismatch { .. })));
    }

    #[test]
    fn too_few_patches_is_an_error() {
        let params = init_encoder(&EncoderConfig::default()).unwrap();
        let imgs = vec![synth::scene(96, 96, 1)];
        assert!(matches!(
            compute_pristine_stats(&params, &imgs, 96),
            Err(Error::InsufficientData(_))
        ));
    }
}
