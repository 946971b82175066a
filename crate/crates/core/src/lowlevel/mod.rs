//! Low-level pathway: contrastive training over distorted sets, pristine
//! statistics and the zero-shot low-level quality.

mod loss;
mod stats;
mod train;

pub use loss::{qacl_loss, qacl_scene, QaclLoss, QaclScene, SceneGrads, UNIT_TOL};
pub use stats::{
    compute_pristine_stats, load_stats, lowlevel_distance, mahalanobis, mean_cov, patch_features, q_low, save_stats,
    PristineStats, COV_EPS, DEFAULT_K1, DEFAULT_PATCH_SIDE, STATS_MAGIC, STATS_VERSION,
};
pub use train::{train_lowlevel, train_lowlevel_with, Qacl, QaclConfig, SceneObjective, TrainOutcome};

pub(crate) use loss::{axpy, check_unit, dot};
