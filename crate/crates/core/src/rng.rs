//! Reproducible random streams.
//!
//! Every stream is a ChaCha20 generator keyed by a 64-bit seed. Sub-seeds are
//! derived from a parent seed and a path of integer tags with SplitMix64, so a
//! simulation's streams do not depend on how many other streams were drawn or
//! on thread scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

/// Identifier recorded in run manifests. Bump the suffix if any stream layout changes.
pub const RNG_ALGORITHM: &str =
    "chacha20 (rand_chacha 0.9 seed_from_u64); splitmix64 seed tree; \
     normals: rand_distr 0.5 StandardNormal ziggurat; layout v1";

pub type StreamRng = ChaCha20Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Child seed of `parent` along `path`.
pub fn derive_seed(parent: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(parent), |acc, &tag| splitmix64(acc ^ splitmix64(tag)))
}

pub fn stream(seed: u64) -> StreamRng {
    ChaCha20Rng::seed_from_u64(seed)
}
