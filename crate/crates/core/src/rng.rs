//! Seeded random streams.
//!
//! Every consumer of randomness derives its own ChaCha stream from a base seed
//! and a path of integer tags, so results never depend on call order across
//! subsystems or on thread scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Stream domains.
pub(crate) mod domain {
    pub const MODEL_INIT: u64 = 1;
    pub const DROPOUT: u64 = 2;
    pub const TRIALS: u64 = 3;
    pub const SAMPLE: u64 = 4;
    pub const ATMM: u64 = 5;
    pub const SHUFFLE: u64 = 6;
    pub const BOOTSTRAP: u64 = 7;
    pub const SYNTH: u64 = 8;
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mixes `seed` with `tags` into a single 64-bit key.
pub fn derive_key(seed: u64, tags: &[u64]) -> u64 {
    tags.iter()
        .fold(splitmix(seed), |acc, &t| splitmix(acc ^ splitmix(t)))
}

pub fn stream(seed: u64, tags: &[u64]) -> StreamRng {
    ChaCha8Rng::seed_from_u64(derive_key(seed, tags))
}
