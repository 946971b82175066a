//! Scoring and evaluation: features, regressors, zero-shot scores, rank
//! correlations and the split protocol.

mod corr;
mod features;
mod manifest;
mod protocol;
mod regress;
mod zeroshot;

pub use corr::{fractional_ranks, median, plcc, srcc};
pub use features::{extract_features, FeatureModels, FeatureTable};
pub use manifest::{DatasetManifest, ManifestEntry};
pub use protocol::{
    run_cross_protocol, run_protocol, BudgetReport, EvalReport, ProtocolConfig, SplitResult, DEFAULT_BUDGETS,
    DEFAULT_SPLITS, TRAIN_FRACTION,
};
pub use regress::{
    fit_linear_svr, fit_regressor, fit_ridge, predict_zs, standardization, RegressorConfig, RegressorKind,
    RegressorModel,
};
pub use zeroshot::{score_zero_shot, ZeroShotModel, ZeroShotReport, ZeroShotRow, ZeroShotScore};

use crate::error::Result;

/// Data-efficient prediction `f_d(z_x)`.
pub fn predict_de(model: &RegressorModel, feature: &[f64]) -> Result<f64> {
    model.predict(feature)
}
