//! Binary parameter files.
//!
//! Layout (little-endian): magic `NRQP`, format version `u32`, config hash
//! `u64`, value count `u64`, then every parameter as raw `f64` in
//! [`EncoderParams::slices`] order.

use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use super::{EncoderConfig, EncoderParams};
use crate::error::{Error, Result};

pub const PARAMS_MAGIC: &[u8; 4] = b"NRQP";
pub const PARAMS_VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 + 8 + 8;

/// Stable hash of an encoder architecture (SHA-256 of its JSON form with the
/// init seed cleared, truncated).
pub fn config_hash(cfg: &EncoderConfig) -> u64 {
    let arch = EncoderConfig { seed: 0, ..cfg.clone() };
    let json = serde_json::to_vec(&arch).expect("encoder config serializes");
    let digest = Sha256::digest(&json);
    let mut b = [0u8; 8];
    b.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(b)
}

pub fn save_params(params: &EncoderParams, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let n = params.num_values();
    let mut buf = Vec::with_capacity(HEADER_LEN + 8 * n);
    buf.extend_from_slice(PARAMS_MAGIC);
    buf.extend_from_slice(&PARAMS_VERSION.to_le_bytes());
    buf.extend_from_slice(&config_hash(params.config()).to_le_bytes());
    buf.extend_from_slice(&(n as u64).to_le_bytes());
    for s in params.slices() {
        for v in s {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}

/// Loads parameters written for exactly `cfg`.
pub fn load_params(path: impl AsRef<Path>, cfg: &EncoderConfig) -> Result<EncoderParams> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() < HEADER_LEN {
        return Err(Error::corrupt(path, "truncated header"));
    }
    if &bytes[..4] != PARAMS_MAGIC {
        return Err(Error::corrupt(path, "not a parameter file"));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().expect("4 bytes"));
    let u64_at = |o: usize| u64::from_le_bytes(bytes[o..o + 8].try_into().expect("8 bytes"));
    let version = u32_at(4);
    if version != PARAMS_VERSION {
        return Err(Error::Version {
            path: path.to_path_buf(),
            found: version,
            expected: PARAMS_VERSION,
        });
    }
    if u64_at(8) != config_hash(cfg) {
        return Err(Error::ConfigMismatch {
            path: path.to_path_buf(),
        });
    }
    let mut params = super::init_encoder(cfg)?;
    let expected = params.num_values();
    let count = u64_at(16) as usize;
    if count != expected {
        return Err(Error::corrupt(path, format!("{count} values, expected {expected}")));
    }
    if bytes.len() != HEADER_LEN + 8 * expected {
        return Err(Error::corrupt(
            path,
            format!("payload is {} bytes, expected {}", bytes.len() - HEADER_LEN, 8 * expected),
        ));
    }
    let mut values = bytes[HEADER_LEN..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")));
    for s in params.slices_mut() {
        for v in s.iter_mut() {
            *v = values.next().expect("length checked");
        }
    }
    if !params.all_finite() {
        return Err(Error::corrupt(path, "non-finite parameter"));
    }
    Ok(params)
}
