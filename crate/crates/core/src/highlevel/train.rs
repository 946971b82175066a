//! Group-contrastive fine-tuning of the high-level encoder.

use log::{debug, info};
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::groups::{form_groups, gcl_loss, group_size, DEFAULT_K2};
use super::{highlevel_input, AnchorPair, DEFAULT_CROP};
use crate::error::{Error, Result};
use crate::imaging::Image;
use crate::nnet::{
    backward, forward, optimizer_step, EncoderConfig, EncoderParams, LrSchedule, OptimizerConfig, OptimizerState,
    ParamGrads,
};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GclConfig {
    pub tau2: f64,
    pub batch: usize,
    pub k: usize,
    pub k2: f64,
    pub epochs: usize,
    pub optimizer: OptimizerConfig,
    pub encoder: EncoderConfig,
    pub crop: usize,
    pub seed: u64,
}

impl Default for GclConfig {
    fn default() -> Self {
        Self {
            tau2: 0.1,
            batch: 32,
            k: 8,
            k2: DEFAULT_K2,
            epochs: 15,
            optimizer: OptimizerConfig {
                lr: 1e-4,
                weight_decay: 0.0,
                ..OptimizerConfig::default()
            },
            encoder: EncoderConfig::default(),
            crop: DEFAULT_CROP,
            seed: 0,
        }
    }
}

impl GclConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau2 > 0.0) {
            return Err(Error::InvalidArgument(format!("tau2 must be positive, got {}", self.tau2)));
        }
        if !(self.k2 > 0.0) {
            return Err(Error::InvalidArgument(format!("k2 must be positive, got {}", self.k2)));
        }
        if self.k < 2 {
            return Err(Error::InvalidArgument(format!("k must be at least 2, got {}", self.k)));
        }
        let m = group_size(self.batch, self.k);
        if m < 2 || self.batch < 2 * m {
            return Err(Error::InvalidArgument(format!(
                "batch {} with k = {} gives group size {m}; need 2 <= M and 2M <= batch",
                self.batch, self.k
            )));
        }
        if self.crop == 0 {
            return Err(Error::InvalidArgument("crop must be positive".into()));
        }
        self.encoder.validate()
    }
}

#[derive(Debug, Clone)]
pub struct HighTrainOutcome {
    pub params: EncoderParams,
    pub step_losses: Vec<f64>,
    pub epoch_losses: Vec<f64>,
}

/// Fine-tunes `params` on `corpus`; the anchors stay fixed. Incomplete
/// final batches are dropped.
pub fn train_highlevel(
    params: EncoderParams,
    corpus: &[Image],
    anchors: &AnchorPair,
    cfg: &GclConfig,
) -> Result<HighTrainOutcome> {
    cfg.validate()?;
    if anchors.dim() != params.config().projection_dim {
        return Err(Error::Dimension(format!(
            "anchors have {} dimensions, encoder projects to {}",
            anchors.dim(),
            params.config().projection_dim
        )));
    }
    if corpus.len() < cfg.batch {
        return Err(Error::InsufficientData(format!(
            "{} images cannot fill a batch of {}",
            corpus.len(),
            cfg.batch
        )));
    }
    let mut params = params;
    if cfg.epochs == 0 {
        return Ok(HighTrainOutcome {
            params,
            step_losses: Vec::new(),
            epoch_losses: Vec::new(),
        });
    }
    let inputs: Vec<Image> = corpus
        .par_iter()
        .map(|img| highlevel_input(img, cfg.crop))
        .collect::<Result<_>>()?;
    let batches = inputs.len() / cfg.batch;
    let schedule = LrSchedule::Cosine {
        total_steps: (cfg.epochs * batches) as u64,
    };
    let mut state = OptimizerState::new(&params, cfg.optimizer, schedule);
    let mut step_losses = Vec::new();
    let mut epoch_losses = Vec::new();
    for epoch in 0..cfg.epochs {
        let mut order: Vec<usize> = (0..inputs.len()).collect();
        order.shuffle(&mut rng::stream(cfg.seed, epoch as u64, "shuffle-high"));
        let mut total = 0.0;
        for batch in order.chunks_exact(cfg.batch) {
            let embeddings: Vec<Vec<f64>> = batch
                .par_iter()
                .map(|&i| Ok(forward(&params, &inputs[i])?.projected))
                .collect::<Result<_>>()?;
            let split = form_groups(&embeddings, anchors, cfg.k)?;
            let out = gcl_loss(&split, &embeddings, cfg.tau2)?;
            let members: Vec<usize> = split.bad.iter().chain(&split.good).copied().collect();
            let parts: Vec<ParamGrads> = members
                .par_iter()
                .map(|&b| backward(&params, &inputs[batch[b]], &out.grads[b]))
                .collect::<Result<_>>()?;
            let mut grads = params.zero_grads();
            for g in &parts {
                grads.add_assign(g);
            }
            optimizer_step(&mut params, &grads, &mut state)?;
            debug!("epoch {epoch} step {} loss {:.6}", state.step, out.loss);
            step_losses.push(out.loss);
            total += out.loss;
        }
        let mean = total / batches as f64;
        info!("epoch {epoch}: mean group loss {mean:.6}");
        epoch_losses.push(mean);
    }
    Ok(HighTrainOutcome {
        params,
        step_losses,
        epoch_losses,
    })
}
