//! Seed derivation for reproducible, schedule-independent random streams.
//!
//! Every consumer of randomness derives its own stream from the global seed,
//! an item index and a purpose tag, so results never depend on the order in
//! which work items are processed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed from `(seed, index, tag)`.
pub fn derive_seed(seed: u64, index: u64, tag: &str) -> u64 {
    let mut h = mix(seed.wrapping_add(GOLDEN));
    for b in tag.bytes() {
        h = mix(h ^ u64::from(b).wrapping_add(GOLDEN));
    }
    mix(h ^ index.wrapping_mul(GOLDEN).wrapping_add(1))
}

pub fn stream(seed: u64, index: u64, tag: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, index, tag))
}
