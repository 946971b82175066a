//! Anchor-based quality, group formation and the group-contrastive loss.

use super::AnchorPair;
use crate::error::{Error, Result};
use crate::lowlevel::{axpy, check_unit, dot};

pub const DEFAULT_K2: f64 = 10.0;

/// `z . z_b - z . z_g`; larger means worse.
pub fn anchor_margin(z: &[f64], anchors: &AnchorPair) -> Result<f64> {
    if z.len() != anchors.dim() {
        return Err(Error::Dimension(format!(
            "embedding length {} != anchor length {}",
            z.len(),
            anchors.dim()
        )));
    }
    check_unit(z, "embedding")?;
    Ok(dot(z, anchors.bad()) - dot(z, anchors.good()))
}

/// `1 / (1 + exp(k2 (z . z_b - z . z_g)))`.
pub fn q_high(z: &[f64], anchors: &AnchorPair, k2: f64) -> Result<f64> {
    if !(k2 > 0.0) {
        return Err(Error::InvalidArgument(format!("k2 must be positive, got {k2}")));
    }
    Ok(1.0 / (1.0 + (k2 * anchor_margin(z, anchors)?).exp()))
}

/// `round(n / k)` with ties to even.
pub fn group_size(n: usize, k: usize) -> usize {
    (n as f64 / k as f64).round_ties_even() as usize
}

/// The lowest- and highest-quality members of a batch.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupSplit {
    /// Lowest `M` by quality, ascending.
    pub bad: Vec<usize>,
    /// Highest `M` by quality, ascending.
    pub good: Vec<usize>,
    /// Batch indices sorted by ascending quality.
    pub order: Vec<usize>,
}

impl GroupSplit {
    pub fn m(&self) -> usize {
        self.bad.len()
    }
}

/// Sorts by ascending `Q_H` (ties by index) and takes the first and last `M`.
///
/// Sorting uses the anchor margin, so the split does not depend on `k2`.
pub fn form_groups(embeddings: &[Vec<f64>], anchors: &AnchorPair, k: usize) -> Result<GroupSplit> {
    if k < 2 {
        return Err(Error::InvalidArgument(format!("separability k must be at least 2, got {k}")));
    }
    let n = embeddings.len();
    let m = group_size(n, k);
    if m == 0 || n < 2 * m {
        return Err(Error::InvalidArgument(format!(
            "batch of {n} cannot hold two groups of size {m} (k = {k})"
        )));
    }
    let margins = embeddings
        .iter()
        .map(|z| anchor_margin(z, anchors))
        .collect::<Result<Vec<_>>>()?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| margins[b].total_cmp(&margins[a]).then(a.cmp(&b)));
    Ok(GroupSplit {
        bad: order[..m].to_vec(),
        good: order[n - m..].to_vec(),
        order,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GclLoss {
    pub loss: f64,
    /// One gradient per batch embedding; zero for non-members.
    pub grads: Vec<Vec<f64>>,
}

fn group_terms(own: &[usize], other: &[usize], z: &[Vec<f64>], tau: f64, grads: &mut [Vec<f64>]) -> f64 {
    let p = |a: usize, b: usize| ((dot(&z[a], &z[b]) - 1.0) / tau).exp();
    let mut total = 0.0;
    for &i in own {
        let same: Vec<(usize, f64)> = own.iter().filter(|&&j| j != i).map(|&j| (j, p(i, j))).collect();
        let cross: Vec<(usize, f64)> = other.iter().map(|&j| (j, p(i, j))).collect();
        let num: f64 = same.iter().map(|x| x.1).sum();
        let den = num + cross.iter().map(|x| x.1).sum::<f64>();
        total += den.ln() - num.ln();
        for &(j, pj) in &same {
            let c = pj / tau * (1.0 / den - 1.0 / num);
            axpy(&mut grads[i], c, &z[j]);
            axpy(&mut grads[j], c, &z[i]);
        }
        for &(j, pj) in &cross {
            let c = pj / (tau * den);
            axpy(&mut grads[i], c, &z[j]);
            axpy(&mut grads[j], c, &z[i]);
        }
    }
    total
}

/// Group-contrastive loss over the members of `split`.
pub fn gcl_loss(split: &GroupSplit, embeddings: &[Vec<f64>], tau: f64) -> Result<GclLoss> {
    if !(tau > 0.0) {
        return Err(Error::InvalidArgument(format!("temperature must be positive, got {tau}")));
    }
    let m = split.good.len();
    if split.bad.len() != m {
        return Err(Error::InvalidArgument("groups differ in size".into()));
    }
    if m < 2 {
        return Err(Error::InvalidArgument(format!("group size {m} leaves no in-group partner")));
    }
    let n = embeddings.len();
    let dim = embeddings.first().map_or(0, Vec::len);
    let mut seen = vec![false; n];
    for &i in split.good.iter().chain(&split.bad) {
        if i >= n || seen[i] {
            return Err(Error::InvalidArgument(format!("group member {i} repeated or out of range")));
        }
        seen[i] = true;
        if embeddings[i].len() != dim {
            return Err(Error::Dimension("embeddings differ in length".into()));
        }
        check_unit(&embeddings[i], "embedding")?;
    }
    let mut grads = vec![vec![0.0; dim]; n];
    let loss = group_terms(&split.good, &split.bad, embeddings, tau, &mut grads)
        + group_terms(&split.bad, &split.good, embeddings, tau, &mut grads);
    if !loss.is_finite() {
        return Err(Error::Numeric(format!("group-contrastive loss is {loss}")));
    }
    Ok(GclLoss { loss, grads })
}
