//! Seed derivation for independent, reproducible random streams.
//!
//! Every stochastic step draws from a stream keyed by `(seed, path...)`, so a
//! result never depends on how work was scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

#[inline]
fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a base seed with a path of indices into a new seed.
pub fn derive_seed(seed: u64, path: &[u64]) -> u64 {
    path.iter().fold(splitmix(seed), |acc, &p| {
        splitmix(acc ^ splitmix(p.wrapping_add(0x5851_F42D)))
    })
}

pub fn stream(seed: u64, path: &[u64]) -> StreamRng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, path))
}

// Stream tags, so different stages never share a stream.
pub const TAG_BOOTSTRAP: u64 = 1;
pub const TAG_SIMULATE: u64 = 2;
pub const TAG_SPLIT: u64 = 3;
pub const TAG_FOLDS: u64 = 4;
pub const TAG_REPLICATE: u64 = 5;
pub const TAG_PERMUTE: u64 = 6;
