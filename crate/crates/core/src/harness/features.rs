//! Concatenated low- and high-level features, and feature tables on disk.

use std::path::Path;

use rayon::prelude::*;

use super::manifest::{csv_error, DatasetManifest};
use crate::error::{Error, Result};
use crate::highlevel::highlevel_input;
use crate::imaging::{load_image, Image};
use crate::lowlevel::{mean_cov, patch_features};
use crate::nnet::{forward, EncoderParams};

/// Both encoders plus the input geometry of each pathway.
#[derive(Debug, Clone)]
pub struct FeatureModels {
    pub low: EncoderParams,
    pub high: EncoderParams,
    pub patch_side: usize,
    pub crop: usize,
}

impl FeatureModels {
    pub fn dim(&self) -> usize {
        self.low.config().backbone_dim() + self.high.config().backbone_dim()
    }
}

/// Mean low-level backbone feature over the image's patches, followed by the
/// high-level backbone feature of its center crop.
pub fn extract_features(models: &FeatureModels, img: &Image) -> Result<Vec<f64>> {
    let (mut low, _) = mean_cov(&patch_features(&models.low, img, models.patch_side)?)?;
    let high = forward(&models.high, &highlevel_input(img, models.crop)?)?.backbone;
    low.extend(high);
    if low.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite feature".into()));
    }
    Ok(low)
}

/// Rows keyed by manifest path, with optional MOS.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    pub names: Vec<String>,
    pub mos: Vec<Option<f64>>,
    pub features: Vec<Vec<f64>>,
}

impl FeatureTable {
    pub fn from_manifest(manifest: &DatasetManifest, models: &FeatureModels) -> Result<Self> {
        let features = manifest
            .entries
            .par_iter()
            .map(|e| extract_features(models, &load_image(&e.path)?))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            names: manifest.entries.iter().map(|e| e.name.clone()).collect(),
            mos: manifest.entries.iter().map(|e| e.mos).collect(),
            features,
        })
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn require_mos(&self) -> Result<Vec<f64>> {
        self.mos
            .iter()
            .zip(&self.names)
            .map(|(m, n)| m.ok_or_else(|| Error::Data(format!("no MOS for {n}"))))
            .collect()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let dim = self.features.first().map_or(0, Vec::len);
        let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
        let mut header = vec!["path".to_string(), "mos".to_string()];
        header.extend((0..dim).map(|i| format!("f{i}")));
        w.write_record(&header).map_err(|e| csv_error(path, e))?;
        for ((n, m), f) in self.names.iter().zip(&self.mos).zip(&self.features) {
            let mut rec = vec![n.clone(), m.map(|v| v.to_string()).unwrap_or_default()];
            rec.extend(f.iter().map(|v| v.to_string()));
            w.write_record(&rec).map_err(|e| csv_error(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut r = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
        let header = r.headers().map_err(|e| csv_error(path, e))?.clone();
        if header.len() < 3 || &header[0] != "path" || &header[1] != "mos" {
            return Err(Error::Data(format!("{}: expected header path,mos,f0,...", path.display())));
        }
        let dim = header.len() - 2;
        let mut table = Self {
            names: Vec::new(),
            mos: Vec::new(),
            features: Vec::new(),
        };
        let num = |s: &str| -> Result<f64> {
            s.trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::Data(format!("{}: bad number {s:?}", path.display())))
        };
        for rec in r.records() {
            let rec = rec.map_err(|e| csv_error(path, e))?;
            table.names.push(rec[0].to_string());
            table.mos.push(if rec[1].trim().is_empty() { None } else { Some(num(&rec[1])?) });
            table.features.push((0..dim).map(|i| num(&rec[i + 2])).collect::<Result<_>>()?);
        }
        if table.is_empty() {
            return Err(Error::Data(format!("{}: no feature rows", path.display())));
        }
        Ok(table)
    }
}
