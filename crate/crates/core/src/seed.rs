//! Deterministic seed derivation.
//!
//! Every random stream in the workbench is keyed by a base seed plus a short
//! list of tags (split, realization index, purpose), so streams never overlap
//! and any single stream can be regenerated in isolation.

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mixes `tags` into `base`.
pub fn derive(base: u64, tags: &[u64]) -> u64 {
    tags.iter().fold(splitmix(base), |acc, &t| splitmix(acc ^ splitmix(t)))
}

/// Stream purposes used as the first derivation tag.
pub mod purpose {
    pub const TRAIN: u64 = 1;
    pub const VAL: u64 = 2;
    pub const TEST: u64 = 3;
    pub const THROUGHPUT: u64 = 4;
    pub const BLER_DRAWS: u64 = 5;
}
