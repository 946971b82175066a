//! Label-free scoring: `Q_H + Q_L` per image.

use std::path::Path;

use rayon::prelude::*;

use super::corr::srcc;
use super::manifest::{csv_error, DatasetManifest};
use super::regress::predict_zs;
use crate::error::{Error, Result};
use crate::highlevel::{highlevel_input, q_high, AnchorPair};
use crate::imaging::{load_image, Image};
use crate::lowlevel::{lowlevel_distance, q_low, PristineStats};
use crate::nnet::{forward, EncoderParams};

#[derive(Debug, Clone)]
pub struct ZeroShotModel {
    pub low: EncoderParams,
    pub stats: PristineStats,
    pub high: EncoderParams,
    pub anchors: AnchorPair,
    pub k1: f64,
    pub k2: f64,
    pub crop: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZeroShotScore {
    pub distance: f64,
    pub q_low: f64,
    pub q_high: f64,
    pub score: f64,
}

impl ZeroShotModel {
    pub fn score(&self, img: &Image) -> Result<ZeroShotScore> {
        let distance = lowlevel_distance(&self.low, &self.stats, img)?;
        let ql = q_low(distance, self.k1);
        let z = forward(&self.high, &highlevel_input(img, self.crop)?)?.projected;
        let qh = q_high(&z, &self.anchors, self.k2)?;
        Ok(ZeroShotScore {
            distance,
            q_low: ql,
            q_high: qh,
            score: predict_zs(qh, ql)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ZeroShotRow {
    pub name: String,
    pub mos: Option<f64>,
    pub score: ZeroShotScore,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ZeroShotReport {
    pub rows: Vec<ZeroShotRow>,
    /// Against MOS, when every entry has one.
    pub srcc: Option<f64>,
}

pub fn score_zero_shot(manifest: &DatasetManifest, model: &ZeroShotModel) -> Result<ZeroShotReport> {
    let scores = manifest
        .entries
        .par_iter()
        .map(|e| model.score(&load_image(&e.path)?))
        .collect::<Result<Vec<_>>>()?;
    let rows: Vec<ZeroShotRow> = manifest
        .entries
        .iter()
        .zip(scores)
        .map(|(e, score)| ZeroShotRow {
            name: e.name.clone(),
            mos: e.mos,
            score,
        })
        .collect();
    let srcc = match rows.iter().map(|r| r.mos).collect::<Option<Vec<f64>>>() {
        Some(mos) if mos.len() >= 2 => {
            let s: Vec<f64> = rows.iter().map(|r| r.score.score).collect();
            Some(srcc(&s, &mos)?)
        }
        _ => None,
    };
    Ok(ZeroShotReport { rows, srcc })
}

impl ZeroShotReport {
    /// `path,score[,mos]`.
    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let with_mos = self.rows.iter().all(|r| r.mos.is_some());
        let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
        let mut header = vec!["path", "score"];
        if with_mos {
            header.push("mos");
        }
        w.write_record(&header).map_err(|e| csv_error(path, e))?;
        for r in &self.rows {
            let mut rec = vec![r.name.clone(), r.score.score.to_string()];
            if let (true, Some(m)) = (with_mos, r.mos) {
                rec.push(m.to_string());
            }
            w.write_record(&rec).map_err(|e| csv_error(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}
