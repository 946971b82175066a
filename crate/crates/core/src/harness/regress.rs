//! Linear regressors on standardized features: ridge and linear epsilon-SVR.

use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RegressorKind {
    Ridge,
    Svr,
}

impl std::str::FromStr for RegressorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ridge" => Ok(Self::Ridge),
            "svr" | "linear-svr" => Ok(Self::Svr),
            other => Err(Error::InvalidArgument(format!("unknown regressor {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RegressorConfig {
    pub kind: RegressorKind,
    /// Ridge penalty on the mean squared error.
    pub lambda: f64,
    pub svr_c: f64,
    /// Insensitive-zone half width as a fraction of the MOS standard deviation.
    pub svr_epsilon_frac: f64,
    pub svr_iterations: usize,
}

impl Default for RegressorConfig {
    fn default() -> Self {
        Self {
            kind: RegressorKind::Ridge,
            lambda: 1.0,
            svr_c: 1.0,
            svr_epsilon_frac: 0.1,
            svr_iterations: 4000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressorModel {
    pub kind: RegressorKind,
    pub weights: Vec<f64>,
    pub bias: f64,
    pub feature_mean: Vec<f64>,
    pub feature_scale: Vec<f64>,
    /// Set when the training targets were all equal; predictions return it.
    pub constant: Option<f64>,
    pub config: RegressorConfig,
}

/// Per-feature mean and population standard deviation (1 where it vanishes).
pub fn standardization(x: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let n = x.len() as f64;
    let dim = x[0].len();
    let mut mean = vec![0.0; dim];
    for row in x {
        mean.iter_mut().zip(row).for_each(|(m, v)| *m += v);
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut scale = vec![0.0; dim];
    for row in x {
        for ((s, v), m) in scale.iter_mut().zip(row).zip(&mean) {
            *s += (v - m) * (v - m);
        }
    }
    for s in &mut scale {
        let sd = (*s / n).sqrt();
        *s = if sd > 1e-12 { sd } else { 1.0 };
    }
    (mean, scale)
}

fn standardize(row: &[f64], mean: &[f64], scale: &[f64]) -> Vec<f64> {
    row.iter().zip(mean).zip(scale).map(|((v, m), s)| (v - m) / s).collect()
}

fn check_training(x: &[Vec<f64>], y: &[f64]) -> Result<usize> {
    if x.len() != y.len() {
        return Err(Error::Dimension(format!("{} feature rows vs {} targets", x.len(), y.len())));
    }
    if x.len() < 2 {
        return Err(Error::InsufficientData("regression needs at least two samples".into()));
    }
    let dim = x[0].len();
    if dim == 0 || x.iter().any(|r| r.len() != dim) {
        return Err(Error::Dimension("feature rows differ in length or are empty".into()));
    }
    if x.iter().flatten().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite regression input".into()));
    }
    Ok(dim)
}

/// Minimizes `mean((y - b - w.z)^2) + lambda |w|^2` on standardized `z`.
pub fn fit_ridge(z: &[Vec<f64>], y: &[f64], lambda: f64) -> Result<(Vec<f64>, f64)> {
    let n = z.len();
    let dim = z[0].len();
    let y_mean = y.iter().sum::<f64>() / n as f64;
    let mut gram = DMatrix::<f64>::zeros(dim, dim);
    let mut rhs = DVector::<f64>::zeros(dim);
    for (row, &t) in z.iter().zip(y) {
        let r = DVector::from_column_slice(row);
        gram.ger(1.0 / n as f64, &r, &r, 1.0);
        rhs.axpy((t - y_mean) / n as f64, &r, 1.0);
    }
    for i in 0..dim {
        gram[(i, i)] += lambda;
    }
    let w = match gram.clone().cholesky() {
        Some(c) => c.solve(&rhs),
        None => gram
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::Numeric("ridge system is singular; increase lambda".into()))?,
    };
    if w.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("ridge solution is not finite".into()));
    }
    // Features are centered, so the intercept is the target mean.
    Ok((w.iter().copied().collect(), y_mean))
}

fn svr_objective(z: &[Vec<f64>], y: &[f64], w: &[f64], b: f64, c: f64, eps: f64) -> f64 {
    let reg = 0.5 * w.iter().map(|v| v * v).sum::<f64>();
    let loss: f64 = z
        .iter()
        .zip(y)
        .map(|(row, t)| {
            let r = t - b - row.iter().zip(w).map(|(a, b)| a * b).sum::<f64>();
            (r.abs() - eps).max(0.0)
        })
        .sum();
    reg + c * loss
}

/// Subgradient descent on `0.5 |w|^2 + C sum max(0, |r| - eps)`; returns the best iterate.
pub fn fit_linear_svr(z: &[Vec<f64>], y: &[f64], c: f64, eps: f64, iterations: usize) -> (Vec<f64>, f64) {
    let n = z.len();
    let dim = z[0].len();
    let mean_sq = z.iter().map(|r| r.iter().map(|v| v * v).sum::<f64>()).sum::<f64>() / n as f64;
    let eta0 = 1.0 / (1.0 + c * n as f64 * (1.0 + mean_sq));
    let mut w = vec![0.0; dim];
    let mut b = y.iter().sum::<f64>() / n as f64;
    let mut best = (svr_objective(z, y, &w, b, c, eps), w.clone(), b);
    for t in 1..=iterations {
        let mut gw = w.clone();
        let mut gb = 0.0;
        for (row, &target) in z.iter().zip(y) {
            let r = target - b - row.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>();
            if r.abs() > eps {
                let s = c * r.signum();
                gw.iter_mut().zip(row).for_each(|(g, v)| *g -= s * v);
                gb -= s;
            }
        }
        let eta = eta0 * (n as f64) / (t as f64).sqrt();
        w.iter_mut().zip(&gw).for_each(|(wi, g)| *wi -= eta * g);
        b -= eta * gb;
        let obj = svr_objective(z, y, &w, b, c, eps);
        if obj < best.0 {
            best = (obj, w.clone(), b);
        }
    }
    (best.1, best.2)
}

pub fn fit_regressor(x: &[Vec<f64>], y: &[f64], cfg: &RegressorConfig) -> Result<RegressorModel> {
    let dim = check_training(x, y)?;
    let (feature_mean, feature_scale) = standardization(x);
    let mut model = RegressorModel {
        kind: cfg.kind,
        weights: vec![0.0; dim],
        bias: 0.0,
        feature_mean,
        feature_scale,
        constant: None,
        config: *cfg,
    };
    if y.iter().all(|&v| v == y[0]) {
        model.constant = Some(y[0]);
        model.bias = y[0];
        return Ok(model);
    }
    let z: Vec<Vec<f64>> = x
        .iter()
        .map(|r| standardize(r, &model.feature_mean, &model.feature_scale))
        .collect();
    let (w, b) = match cfg.kind {
        RegressorKind::Ridge => {
            if !(cfg.lambda >= 0.0) {
                return Err(Error::InvalidArgument(format!("lambda must be nonnegative, got {}", cfg.lambda)));
            }
            fit_ridge(&z, y, cfg.lambda)?
        }
        RegressorKind::Svr => {
            if !(cfg.svr_c > 0.0 && cfg.svr_epsilon_frac >= 0.0) {
                return Err(Error::InvalidArgument("SVR needs C > 0 and a nonnegative epsilon".into()));
            }
            let n = y.len() as f64;
            let mean = y.iter().sum::<f64>() / n;
            let sd = (y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
            fit_linear_svr(&z, y, cfg.svr_c, cfg.svr_epsilon_frac * sd, cfg.svr_iterations)
        }
    };
    model.weights = w;
    model.bias = b;
    Ok(model)
}

impl RegressorModel {
    pub fn predict(&self, feature: &[f64]) -> Result<f64> {
        if feature.len() != self.weights.len() {
            return Err(Error::Dimension(format!(
                "feature length {} != model length {}",
                feature.len(),
                self.weights.len()
            )));
        }
        if let Some(c) = self.constant {
            return Ok(c);
        }
        let z = standardize(feature, &self.feature_mean, &self.feature_scale);
        Ok(self.bias + z.iter().zip(&self.weights).map(|(a, b)| a * b).sum::<f64>())
    }

    /// Slope and intercept in the original feature units.
    pub fn raw_coefficients(&self) -> (Vec<f64>, f64) {
        let w: Vec<f64> = self.weights.iter().zip(&self.feature_scale).map(|(w, s)| w / s).collect();
        let b = self.bias - w.iter().zip(&self.feature_mean).map(|(a, m)| a * m).sum::<f64>();
        (w, b)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self).expect("model serializes");
        fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let m: Self = serde_json::from_str(&text).map_err(|e| Error::corrupt(path, e.to_string()))?;
        let d = m.weights.len();
        if m.feature_mean.len() != d || m.feature_scale.len() != d {
            return Err(Error::corrupt(path, "inconsistent model vector lengths"));
        }
        Ok(m)
    }
}

/// Label-free score `Q_H + Q_L`.
pub fn predict_zs(q_h: f64, q_l: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&q_h) || !(0.0..=0.5).contains(&q_l) {
        return Err(Error::InvalidArgument(format!(
            "zero-shot inputs out of range: Q_H = {q_h}, Q_L = {q_l}"
        )));
    }
    Ok(q_h + q_l)
}
