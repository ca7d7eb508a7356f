//! Deterministic substream derivation.
//!
//! Every random draw in the crate comes from a `ChaCha8Rng` seeded through
//! [`mix`], which folds a master seed and a list of tag words through
//! splitmix64. Consumers label their substreams with a leading domain
//! constant, so that e.g. the stream for (trial 3, group 1, cloud 7) never
//! collides with the stream for permutation replicate 3. Generation order is
//! then irrelevant: the same (master, tags) always yields the same stream.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Cloud sampling: tags `[DOMAIN_CLOUD, trial, group, cloud]`.
pub const DOMAIN_CLOUD: u64 = 1;
/// Permutation replicates: tags `[DOMAIN_PERM, replicate]` under a test seed.
pub const DOMAIN_PERM: u64 = 2;
/// Per-trial test seeds in the harness: tags `[DOMAIN_TEST, trial]`.
pub const DOMAIN_TEST: u64 = 3;
/// Group subsampling in dataset balancing: tags `[DOMAIN_SUBSAMPLE, group]`.
pub const DOMAIN_SUBSAMPLE: u64 = 4;
/// Partitioning rows into clouds/spaces: tags `[DOMAIN_PARTITION, ...]`.
pub const DOMAIN_PARTITION: u64 = 5;
/// Final representative-space selection: tags `[DOMAIN_SELECT]`.
pub const DOMAIN_SELECT: u64 = 6;

pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Folds `master` and `tags` into a single 64-bit seed.
pub fn mix(master: u64, tags: &[u64]) -> u64 {
    let mut acc = splitmix64(master);
    for &t in tags {
        acc = splitmix64(acc ^ splitmix64(t.wrapping_add(0xa0761d6478bd642f)));
    }
    acc
}

/// A ChaCha8 stream for the given (master, tags) label.
pub fn rng(master: u64, tags: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix(master, tags))
}
