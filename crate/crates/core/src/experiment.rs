//! Desk-scale end-to-end experiment on procedurally generated scenes.
//!
//! Pseudo-MOS is the full-reference similarity between each distorted image
//! and its pristine source; both label-free and few-label predictors are
//! scored against it.

use std::time::Instant;

use log::info;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::frmetrics::SimilarityMeasure;
use crate::harness::{
    extract_features, run_protocol, srcc, EvalReport, FeatureModels, ProtocolConfig, RegressorConfig, ZeroShotModel,
};
use crate::highlevel::{bootstrap_anchors, train_highlevel, AnchorPair, GclConfig};
use crate::imaging::{distort, DistortionSpec, Image};
use crate::lowlevel::{compute_pristine_stats, train_lowlevel, QaclConfig, DEFAULT_K1};
use crate::nnet::{EncoderConfig, EncoderParams, OptimizerConfig, Pooling};
use crate::{rng, synth};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DeskConfig {
    pub seed: u64,
    pub side: usize,
    /// Pristine scenes of the evaluation corpus (each yields 8 distorted images).
    pub eval_scenes: usize,
    pub train_scenes: usize,
    pub pristine_scenes: usize,
    pub patch_side: usize,
    pub low: QaclConfig,
    pub high: GclConfig,
    pub k1: f64,
    pub protocol_budget: usize,
    pub protocol_splits: usize,
    pub regressor: RegressorConfig,
    pub pseudo_mos: SimilarityMeasure,
}

impl Default for DeskConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            side: 256,
            eval_scenes: 25,
            train_scenes: 32,
            pristine_scenes: 40,
            patch_side: 96,
            low: QaclConfig {
                epochs: 3,
                batch_scenes: 4,
                optimizer: OptimizerConfig {
                    lr: 3e-3,
                    ..OptimizerConfig::default()
                },
                encoder: desk_encoder(),
                ..QaclConfig::default()
            },
            high: GclConfig {
                epochs: 2,
                batch: 32,
                encoder: desk_encoder(),
                ..GclConfig::default()
            },
            k1: DEFAULT_K1,
            protocol_budget: 50,
            protocol_splits: 10,
            regressor: RegressorConfig {
                lambda: 0.1,
                ..RegressorConfig::default()
            },
            pseudo_mos: SimilarityMeasure::default(),
        }
    }
}

fn desk_encoder() -> EncoderConfig {
    EncoderConfig {
        pooling: Pooling::MeanStd,
        ..EncoderConfig::default()
    }
}

/// Distorted evaluation images with their pseudo-MOS.
#[derive(Debug, Clone)]
pub struct DeskCorpus {
    pub images: Vec<Image>,
    pub specs: Vec<DistortionSpec>,
    pub scene: Vec<usize>,
    pub mos: Vec<f64>,
}

pub fn build_eval_corpus(cfg: &DeskConfig) -> Result<DeskCorpus> {
    let scenes = synth::corpus(cfg.eval_scenes, cfg.side, cfg.side, rng::derive_seed(cfg.seed, 0, "desk-eval"));
    let specs = DistortionSpec::all();
    let per_scene: Vec<Vec<(Image, f64)>> = scenes
        .par_iter()
        .enumerate()
        .map(|(i, src)| {
            specs
                .iter()
                .enumerate()
                .map(|(j, spec)| {
                    let seed = rng::derive_seed(cfg.seed, (i * specs.len() + j) as u64, "desk-distortion");
                    let img = distort(src, *spec, seed)?;
                    let mos = cfg.pseudo_mos.weight(src, &img)?;
                    Ok((img, mos))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let mut out = DeskCorpus {
        images: Vec::new(),
        specs: Vec::new(),
        scene: Vec::new(),
        mos: Vec::new(),
    };
    for (i, items) in per_scene.into_iter().enumerate() {
        for ((img, mos), spec) in items.into_iter().zip(&specs) {
            out.images.push(img);
            out.specs.push(*spec);
            out.scene.push(i);
            out.mos.push(mos);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct DeskModels {
    pub low: EncoderParams,
    pub high: EncoderParams,
    pub anchors: AnchorPair,
    pub low_epoch_losses: Vec<f64>,
    pub high_epoch_losses: Vec<f64>,
}

/// Trains both encoders and bootstraps anchors on training scenes disjoint
/// from the evaluation corpus.
pub fn train_desk_models(cfg: &DeskConfig) -> Result<DeskModels> {
    let train = synth::corpus(cfg.train_scenes, cfg.side, cfg.side, rng::derive_seed(cfg.seed, 0, "desk-train"));
    let low_cfg = QaclConfig {
        seed: cfg.seed,
        ..cfg.low.clone()
    };
    let low = train_lowlevel(&train, &low_cfg)?;

    // The high-level encoder starts from the low-level weights.
    let init = low.params.clone();
    let good: Vec<Image> = train.clone();
    let bad: Vec<Image> = train
        .par_iter()
        .enumerate()
        .flat_map_iter(|(i, img)| {
            DistortionSpec::all()
                .into_iter()
                .filter(|s| s.level() == 2)
                .enumerate()
                .map(move |(j, s)| distort(img, s, rng::derive_seed(cfg.seed, (i * 8 + j) as u64, "desk-bad")))
                .collect::<Vec<_>>()
        })
        .collect::<Result<_>>()?;
    let anchors = bootstrap_anchors(&init, &good, &bad, cfg.high.crop)?;
    let mut high_corpus = good;
    high_corpus.extend(bad);
    let high_cfg = GclConfig {
        seed: cfg.seed,
        ..cfg.high.clone()
    };
    let high = train_highlevel(init, &high_corpus, &anchors, &high_cfg)?;
    Ok(DeskModels {
        low: low.params,
        high: high.params,
        anchors,
        low_epoch_losses: low.epoch_losses,
        high_epoch_losses: high.epoch_losses,
    })
}

#[derive(Debug, Clone)]
pub struct DeskOutcome {
    pub zero_shot_scores: Vec<f64>,
    pub zero_shot_srcc: f64,
    /// SRCC of `Q_L` and of `Q_H` alone.
    pub q_low_srcc: f64,
    pub q_high_srcc: f64,
    pub report: EvalReport,
    pub low_epoch_losses: Vec<f64>,
    pub high_epoch_losses: Vec<f64>,
    pub seconds: f64,
}

pub fn run_desk_experiment(cfg: &DeskConfig) -> Result<DeskOutcome> {
    let start = Instant::now();
    let corpus = build_eval_corpus(cfg)?;
    info!("evaluation corpus ready ({:.1}s)", start.elapsed().as_secs_f64());
    let models = train_desk_models(cfg)?;
    info!("models trained ({:.1}s)", start.elapsed().as_secs_f64());

    let pristine = synth::corpus(
        cfg.pristine_scenes,
        cfg.side,
        cfg.side,
        rng::derive_seed(cfg.seed, 0, "desk-pristine"),
    );
    let stats = compute_pristine_stats(&models.low, &pristine, cfg.patch_side)?;
    let zs = ZeroShotModel {
        low: models.low.clone(),
        stats,
        high: models.high.clone(),
        anchors: models.anchors.clone(),
        k1: cfg.k1,
        k2: cfg.high.k2,
        crop: cfg.high.crop,
    };
    let parts = corpus
        .images
        .par_iter()
        .map(|img| zs.score(img))
        .collect::<Result<Vec<_>>>()?;
    let zero_shot_scores: Vec<f64> = parts.iter().map(|p| p.score).collect();
    let zero_shot_srcc = srcc(&zero_shot_scores, &corpus.mos)?;
    let q_low_srcc = srcc(&parts.iter().map(|p| p.q_low).collect::<Vec<_>>(), &corpus.mos)?;
    let q_high_srcc = srcc(&parts.iter().map(|p| p.q_high).collect::<Vec<_>>(), &corpus.mos)?;
    info!("Q_L SRCC {q_low_srcc:.4}, Q_H SRCC {q_high_srcc:.4}");
    info!("zero-shot SRCC {zero_shot_srcc:.4}");

    let fm = FeatureModels {
        low: models.low.clone(),
        high: models.high.clone(),
        patch_side: cfg.patch_side,
        crop: cfg.high.crop,
    };
    let features = corpus
        .images
        .par_iter()
        .map(|img| extract_features(&fm, img))
        .collect::<Result<Vec<_>>>()?;
    let report = run_protocol(
        &features,
        &corpus.mos,
        &ProtocolConfig {
            budgets: vec![cfg.protocol_budget],
            n_splits: cfg.protocol_splits,
            seed: cfg.seed,
            regressor: cfg.regressor,
        },
    )?;
    Ok(DeskOutcome {
        zero_shot_scores,
        zero_shot_srcc,
        q_low_srcc,
        q_high_srcc,
        report,
        low_epoch_losses: models.low_epoch_losses,
        high_epoch_losses: models.high_epoch_losses,
        seconds: start.elapsed().as_secs_f64(),
    })
}
