//! Seed derivation and per-index random streams.
//!
//! Every random decision in the toolkit is drawn from a ChaCha stream whose
//! key is a pure function of the master seed and a phase tag, and whose
//! stream id is the work-item index. Results therefore do not depend on the
//! order in which work items are processed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Child seed for `tag`, a pure function of `(master, tag)`.
pub fn derive_seed(master: u64, tag: &str) -> u64 {
    // FNV-1a over the tag, then mixed with the master seed.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in tag.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    splitmix64(splitmix64(master) ^ h)
}

/// Child seed indexed by an integer, e.g. one per latent dimension of a sweep.
pub fn derive_indexed(master: u64, tag: &str, index: u64) -> u64 {
    splitmix64(derive_seed(master, tag) ^ splitmix64(index.wrapping_add(1)))
}

/// Generator for a single seed.
pub fn rng(seed: u64) -> StreamRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent stream number `index` under `seed`.
pub fn stream(seed: u64, index: u64) -> StreamRng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(index);
    r
}
