//! High-level pathway: anchor-based quality, group formation and
//! group-contrastive fine-tuning.

mod anchors;
mod groups;
mod train;

pub use anchors::{bootstrap_anchors, AnchorPair, ANCHOR_WARN_TOL};
pub use groups::{anchor_margin, form_groups, gcl_loss, group_size, q_high, GclLoss, GroupSplit, DEFAULT_K2};
pub use train::{train_highlevel, GclConfig, HighTrainOutcome};

use crate::error::Result;
use crate::imaging::Image;

pub const DEFAULT_CROP: usize = 224;

/// Center crop of side `side`, upscaling first if the image is smaller.
pub fn highlevel_input(img: &Image, side: usize) -> Result<Image> {
    img.ensure_min_side(side)?.center_crop(side, side)
}
