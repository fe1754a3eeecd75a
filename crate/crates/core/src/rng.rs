//! Seed derivation for independent random streams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Seed of stream `k` under `base` (splitmix64 finalizer over both).
pub fn sub_seed(base: u64, k: u64) -> u64 {
    let mut z = base ^ k.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn stream(base: u64, k: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(sub_seed(base, k))
}
