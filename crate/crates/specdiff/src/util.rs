//! Small shared helpers: stable hashing and seeded RNG construction.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// FNV-1a over bytes. Used to derive per-method seeds; stable across
/// platforms and toolchain versions, unlike the std hasher.
pub fn stable_hash(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for byte in bytes {
        hash ^= u64::from(*byte);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// Deterministic RNG for a given seed.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Seed for one method's generator stream within a batch.
pub fn method_seed(batch_seed: u64, method: &str) -> u64 {
    batch_seed ^ stable_hash(method.as_bytes())
}
