//! No-reference image quality toolkit.
//!
//! Two representation pathways are trained without human labels:
//!
//! * a low-level encoder trained with a quality-aware contrastive loss, where
//!   every pair of distorted versions of a scene is a soft positive weighted by
//!   a full-reference similarity ([`frmetrics`]) and a soft negative with the
//!   complementary weight ([`lowlevel`]);
//! * a high-level encoder fine-tuned with a group-contrastive loss, where the
//!   best and worst images of a batch (ranked against fixed "good"/"bad"
//!   anchor embeddings) form groups that are pulled together internally and
//!   pushed apart from each other ([`highlevel`]).
//!
//! The [`harness`] turns the learned features into quality scores, either
//! zero-shot (pristine-corpus distance plus anchor score) or with a linear
//! regressor fitted on a handful of labels, and evaluates them with rank
//! correlations under a random-split protocol.

pub mod config;
pub mod error;
pub mod experiment;
pub mod filter;
pub mod frmetrics;
pub mod harness;
pub mod highlevel;
pub mod imaging;
pub mod lowlevel;
pub mod nnet;
pub mod rng;
pub mod synth;

pub use error::{Error, Result};
