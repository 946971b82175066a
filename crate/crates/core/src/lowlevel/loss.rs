//! The quality-aware contrastive loss and its gradients.

use crate::error::{Error, Result};

/// Tolerance on `|‖z‖ - 1|` for loss inputs.
pub const UNIT_TOL: f64 = 1e-4;

/// Embeddings of one scene: `anchors[j]` is version `j`, `positives[j]` its
/// augmentation, `weights[j][k]` the similarity of versions `j` and `k`.
#[derive(Debug, Clone, Copy)]
pub struct QaclScene<'a> {
    pub anchors: &'a [Vec<f64>],
    pub positives: &'a [Vec<f64>],
    pub weights: &'a [Vec<f64>],
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneGrads {
    pub anchors: Vec<Vec<f64>>,
    pub positives: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QaclLoss {
    /// Sum over scenes and anchors.
    pub loss: f64,
    /// `per_anchor[i][j]`.
    pub per_anchor: Vec<Vec<f64>>,
    pub grads: Vec<SceneGrads>,
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

pub(crate) fn check_unit(z: &[f64], what: &str) -> Result<()> {
    let n = dot(z, z).sqrt();
    if !n.is_finite() || (n - 1.0).abs() > UNIT_TOL {
        return Err(Error::InvalidArgument(format!("{what} is not unit-norm (norm {n})")));
    }
    Ok(())
}

fn validate(scene: &QaclScene<'_>, dim: usize) -> Result<()> {
    let d = scene.anchors.len();
    if d < 2 {
        return Err(Error::InvalidArgument("a scene needs at least two versions".into()));
    }
    if scene.positives.len() != d || scene.weights.len() != d || scene.weights.iter().any(|r| r.len() != d) {
        return Err(Error::Dimension(format!("scene with {d} versions has mismatched positives or weights")));
    }
    for z in scene.anchors.iter().chain(scene.positives) {
        if z.len() != dim {
            return Err(Error::Dimension(format!("embedding length {} != {dim}", z.len())));
        }
        check_unit(z, "embedding")?;
    }
    for (j, row) in scene.weights.iter().enumerate() {
        for (k, &s) in row.iter().enumerate() {
            if j != k && !(0.0..=1.0).contains(&s) {
                return Err(Error::InvalidArgument(format!("weight {s} at ({j}, {k}) outside [0, 1]")));
            }
        }
    }
    Ok(())
}

/// Loss and gradients for one scene.
pub fn qacl_scene(scene: &QaclScene<'_>, tau: f64) -> Result<(Vec<f64>, SceneGrads)> {
    if !(tau > 0.0) {
        return Err(Error::InvalidArgument(format!("temperature must be positive, got {tau}")));
    }
    let dim = scene.anchors.first().map_or(0, Vec::len);
    validate(scene, dim)?;
    let d = scene.anchors.len();
    let z = scene.anchors;
    let mut grads = SceneGrads {
        anchors: vec![vec![0.0; dim]; d],
        positives: vec![vec![0.0; dim]; d],
    };
    let mut losses = Vec::with_capacity(d);
    // Every p is scaled by exp(-1/tau); the ratio is unchanged.
    let p = |a: &[f64], b: &[f64]| ((dot(a, b) - 1.0) / tau).exp();
    for j in 0..d {
        let zj = &z[j];
        let zp = &scene.positives[j];
        let pp = p(zj, zp);
        let mut num = pp;
        let mut den = pp;
        let mut pk = vec![0.0; d];
        for k in (0..d).filter(|&k| k != j) {
            pk[k] = p(zj, &z[k]);
            num += scene.weights[j][k] * pk[k];
            den += pk[k];
        }
        losses.push(den.ln() - num.ln());

        // d/dz_j
        let gj = &mut grads.anchors[j];
        axpy(gj, pp / tau * (1.0 / den - 1.0 / num), zp);
        for k in (0..d).filter(|&k| k != j) {
            let s = scene.weights[j][k];
            axpy(gj, pk[k] / tau * (1.0 / den - s / num), &z[k]);
        }
        // d/dz_j+
        axpy(&mut grads.positives[j], pp / tau * (1.0 / den - 1.0 / num), zj);
        // d/dz_k
        for k in (0..d).filter(|&k| k != j) {
            let s = scene.weights[j][k];
            axpy(&mut grads.anchors[k], pk[k] / tau * (1.0 / den - s / num), zj);
        }
    }
    Ok((losses, grads))
}

/// Total loss over a batch of scenes. Pairs never cross scenes.
pub fn qacl_loss(scenes: &[QaclScene<'_>], tau: f64) -> Result<QaclLoss> {
    let mut loss = 0.0;
    let mut per_anchor = Vec::with_capacity(scenes.len());
    let mut grads = Vec::with_capacity(scenes.len());
    for scene in scenes {
        let (l, g) = qacl_scene(scene, tau)?;
        loss += l.iter().sum::<f64>();
        per_anchor.push(l);
        grads.push(g);
    }
    if !loss.is_finite() {
        return Err(Error::Numeric(format!("contrastive loss is {loss}")));
    }
    Ok(QaclLoss { loss, per_anchor, grads })
}
