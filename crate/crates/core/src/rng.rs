//! Seed derivation for independent, order-free random streams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(GOLDEN);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Derives a child seed from a master seed and a (stream, purpose) pair.
///
/// Different pairs give statistically unrelated seeds, so replication `r`
/// gets the same streams no matter which thread runs it or when.
pub fn derive_seed(master: u64, stream: u64, purpose: u64) -> u64 {
    splitmix64(splitmix64(master ^ splitmix64(stream)) ^ splitmix64(purpose.wrapping_mul(GOLDEN)))
}

pub(crate) fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
