//! Run configuration loaded from TOML; every section is optional.
//!
//! ```toml
//! [low]
//! epochs = 3
//! tau1 = 0.5
//! [low.measure]
//! kind = "fsim"
//! [high]
//! batch = 32
//! k = 8
//! [regressor]
//! kind = "ridge"
//! lambda = 1.0
//! ```

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::{RegressorConfig, DEFAULT_BUDGETS, DEFAULT_SPLITS};
use crate::highlevel::GclConfig;
use crate::lowlevel::{QaclConfig, DEFAULT_K1, DEFAULT_PATCH_SIDE};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ZeroShotConfig {
    pub k1: f64,
    pub patch_side: usize,
}

impl Default for ZeroShotConfig {
    fn default() -> Self {
        Self {
            k1: DEFAULT_K1,
            patch_side: DEFAULT_PATCH_SIDE,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub budgets: Vec<usize>,
    pub splits: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            budgets: DEFAULT_BUDGETS.to_vec(),
            splits: DEFAULT_SPLITS,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub low: QaclConfig,
    pub high: GclConfig,
    pub zero_shot: ZeroShotConfig,
    pub regressor: RegressorConfig,
    pub eval: EvalConfig,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::InvalidArgument(format!("config: {e}")))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|e| Error::InvalidArgument(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}
