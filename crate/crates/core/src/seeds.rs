//! Seed derivation. Every random draw in the crate comes from a ChaCha
//! stream keyed by the master seed, a domain tag and an item index, so
//! parallel and serial runs see the same numbers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub(crate) const DOMAIN_TWIN_DATA: u64 = 1;
pub(crate) const DOMAIN_TWIN_SPLIT: u64 = 2;
pub(crate) const DOMAIN_CLF_DATA: u64 = 3;
pub(crate) const DOMAIN_CLF_SPLIT: u64 = 4;
pub(crate) const DOMAIN_EVAL: u64 = 5;
pub(crate) const DOMAIN_NOISE: u64 = 6;

/// Independent generator for item `index` of `domain`.
pub fn stream_rng(seed: u64, domain: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((domain << 48) ^ index);
    rng
}
