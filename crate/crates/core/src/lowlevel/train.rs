//! Training the low-level encoder with the quality-aware contrastive loss.

use log::{debug, info};
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::loss::{qacl_scene, QaclScene, SceneGrads};
use crate::error::{Error, Result};
use crate::frmetrics::SimilarityMeasure;
use crate::imaging::{distort, fragment, DistortionSpec, FragmentPlan, Image, DEFAULT_GRID, DEFAULT_MINIPATCH};
use crate::nnet::{
    backward, forward, init_encoder, optimizer_step, EncoderConfig, EncoderParams, LrSchedule, OptimizerConfig,
    OptimizerState, ParamGrads,
};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QaclConfig {
    pub tau1: f64,
    pub batch_scenes: usize,
    pub versions: usize,
    pub measure: SimilarityMeasure,
    pub epochs: usize,
    pub optimizer: OptimizerConfig,
    pub encoder: EncoderConfig,
    pub grid_n: usize,
    pub minipatch: usize,
    pub seed: u64,
}

impl Default for QaclConfig {
    fn default() -> Self {
        Self {
            tau1: 0.5,
            batch_scenes: 8,
            versions: 8,
            measure: SimilarityMeasure::default(),
            epochs: 15,
            optimizer: OptimizerConfig::default(),
            encoder: EncoderConfig::default(),
            grid_n: DEFAULT_GRID,
            minipatch: DEFAULT_MINIPATCH,
            seed: 0,
        }
    }
}

impl QaclConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau1 > 0.0) {
            return Err(Error::InvalidArgument(format!("tau1 must be positive, got {}", self.tau1)));
        }
        let max_versions = DistortionSpec::all().len();
        if self.versions < 2 || self.versions > max_versions {
            return Err(Error::InvalidArgument(format!(
                "versions must be in 2..={max_versions}, got {}",
                self.versions
            )));
        }
        if self.batch_scenes == 0 {
            return Err(Error::InvalidArgument("batch_scenes must be at least 1".into()));
        }
        if self.grid_n == 0 || self.minipatch == 0 {
            return Err(Error::InvalidArgument("fragment grid and mini-patch must be positive".into()));
        }
        self.encoder.validate()
    }

    fn input_side(&self) -> usize {
        self.grid_n * self.minipatch
    }
}

/// Per-scene objective on embeddings; the contrastive loss is the default.
pub trait SceneObjective: Sync {
    /// Returns per-anchor losses and gradients w.r.t. every embedding.
    fn evaluate(&self, scene: &QaclScene<'_>, tau: f64) -> Result<(Vec<f64>, SceneGrads)>;
}

/// The quality-aware contrastive loss.
pub struct Qacl;

impl SceneObjective for Qacl {
    fn evaluate(&self, scene: &QaclScene<'_>, tau: f64) -> Result<(Vec<f64>, SceneGrads)> {
        qacl_scene(scene, tau)
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: EncoderParams,
    /// Summed batch loss of every optimizer step.
    pub step_losses: Vec<f64>,
    /// Mean step loss of every epoch.
    pub epoch_losses: Vec<f64>,
}

/// Trains a fresh encoder (`cfg.encoder`) on `corpus`.
pub fn train_lowlevel(corpus: &[Image], cfg: &QaclConfig) -> Result<TrainOutcome> {
    train_lowlevel_with(corpus, cfg, &Qacl)
}

pub fn train_lowlevel_with(corpus: &[Image], cfg: &QaclConfig, objective: &dyn SceneObjective) -> Result<TrainOutcome> {
    cfg.validate()?;
    if corpus.is_empty() {
        return Err(Error::InsufficientData("training corpus is empty".into()));
    }
    let mut params = init_encoder(&cfg.encoder)?;
    if cfg.epochs == 0 {
        return Ok(TrainOutcome {
            params,
            step_losses: Vec::new(),
            epoch_losses: Vec::new(),
        });
    }
    let specs: Vec<DistortionSpec> = DistortionSpec::all().into_iter().take(cfg.versions).collect();
    let scenes: Vec<Image> = corpus
        .iter()
        .map(|img| img.ensure_min_side(cfg.input_side()))
        .collect::<Result<_>>()?;

    info!("computing similarity weights for {} scenes", scenes.len());
    let weights: Vec<Vec<Vec<f64>>> = scenes
        .par_iter()
        .enumerate()
        .map(|(i, img)| {
            let versions = make_versions(img, &specs, scene_seed(cfg, i))?;
            cfg.measure.pairwise_weights(&versions)
        })
        .collect::<Result<_>>()?;

    let batches_per_epoch = scenes.len().div_ceil(cfg.batch_scenes);
    let schedule = LrSchedule::Cosine {
        total_steps: (cfg.epochs * batches_per_epoch) as u64,
    };
    let mut state = OptimizerState::new(&params, cfg.optimizer, schedule);
    let mut step_losses = Vec::with_capacity(cfg.epochs * batches_per_epoch);
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let mut order: Vec<usize> = (0..scenes.len()).collect();
        order.shuffle(&mut rng::stream(cfg.seed, epoch as u64, "shuffle"));
        let mut total = 0.0;
        for batch in order.chunks(cfg.batch_scenes) {
            let results: Vec<(f64, ParamGrads)> = batch
                .par_iter()
                .map(|&i| {
                    let ctx = SceneCtx {
                        cfg,
                        specs: &specs,
                        scene: i,
                        epoch,
                    };
                    scene_step(&params, &scenes[i], &weights[i], &ctx, objective)
                })
                .collect::<Result<_>>()?;
            let mut grads = params.zero_grads();
            let mut loss = 0.0;
            for (l, g) in &results {
                loss += l;
                grads.add_assign(g);
            }
            if !loss.is_finite() {
                return Err(Error::Numeric(format!(
                    "non-finite training loss {loss} at epoch {epoch}, step {}",
                    state.step
                )));
            }
            optimizer_step(&mut params, &grads, &mut state)?;
            debug!("epoch {epoch} step {} loss {loss:.6}", state.step);
            step_losses.push(loss);
            total += loss;
        }
        let mean = total / batches_per_epoch as f64;
        info!("epoch {epoch}: mean loss {mean:.6}");
        epoch_losses.push(mean);
    }
    Ok(TrainOutcome {
        params,
        step_losses,
        epoch_losses,
    })
}

struct SceneCtx<'a> {
    cfg: &'a QaclConfig,
    specs: &'a [DistortionSpec],
    scene: usize,
    epoch: usize,
}

fn scene_seed(cfg: &QaclConfig, scene: usize) -> u64 {
    rng::derive_seed(cfg.seed, scene as u64, "scene")
}

fn make_versions(img: &Image, specs: &[DistortionSpec], seed: u64) -> Result<Vec<Image>> {
    specs
        .iter()
        .enumerate()
        .map(|(j, s)| distort(img, *s, rng::derive_seed(seed, j as u64, "distortion")))
        .collect()
}

fn scene_step(
    params: &EncoderParams,
    img: &Image,
    weights: &[Vec<f64>],
    ctx: &SceneCtx<'_>,
    objective: &dyn SceneObjective,
) -> Result<(f64, ParamGrads)> {
    let cfg = ctx.cfg;
    let versions = make_versions(img, ctx.specs, scene_seed(cfg, ctx.scene))?;
    let d = versions.len();
    // One anchor plan and one positive plan per scene and epoch, shared by
    // all versions so that they differ only in distortion.
    let key = (ctx.epoch * 1_000_003 + ctx.scene) as u64;
    let plan = |tag: &str| {
        FragmentPlan::random(
            cfg.grid_n,
            cfg.minipatch,
            img.height(),
            img.width(),
            rng::derive_seed(cfg.seed, key, tag),
        )
    };
    let (anchor_plan, positive_plan) = (plan("anchor-fragment")?, plan("positive-fragment")?);
    let mut anchors_in = Vec::with_capacity(d);
    let mut positives_in = Vec::with_capacity(d);
    for v in &versions {
        anchors_in.push(fragment(v, &anchor_plan)?);
        positives_in.push(fragment(v, &positive_plan)?);
    }
    let embed = |imgs: &[Image]| -> Result<Vec<Vec<f64>>> {
        imgs.iter().map(|x| Ok(forward(params, x)?.projected)).collect()
    };
    let anchors = embed(&anchors_in)?;
    let positives = embed(&positives_in)?;
    let scene = QaclScene {
        anchors: &anchors,
        positives: &positives,
        weights,
    };
    let (losses, g) = objective.evaluate(&scene, cfg.tau1)?;
    let mut grads = params.zero_grads();
    for (x, up) in anchors_in.iter().zip(&g.anchors).chain(positives_in.iter().zip(&g.positives)) {
        grads.add_assign(&backward(params, x, up)?);
    }
    Ok((losses.iter().sum(), grads))
}
