//! Stable seed derivation. Subsystem and per-view-pair generators are
//! seeded from one user seed through FNV-1a, which (unlike `DefaultHasher`)
//! is fixed across platforms and toolchains.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0100_0000_01b3;

pub fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(FNV_OFFSET, |h, b| {
        (h ^ u64::from(*b)).wrapping_mul(FNV_PRIME)
    })
}

/// Mixes a seed with a sequence of string tags.
pub fn derive_seed(seed: u64, tags: &[&str]) -> u64 {
    let mut bytes = seed.to_le_bytes().to_vec();
    for t in tags {
        // length prefix keeps ("ab","c") and ("a","bc") apart
        bytes.extend_from_slice(&(t.len() as u64).to_le_bytes());
        bytes.extend_from_slice(t.as_bytes());
    }
    fnv1a(&bytes)
}

pub fn rng_for(seed: u64, tags: &[&str]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, tags))
}
