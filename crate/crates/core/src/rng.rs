//! Seed plumbing.
//!
//! All randomness comes from ChaCha8 keyed by `(seed, lane)` with the stream
//! selecting a counter. Two draws with the same triple are identical on every
//! platform, and draws for different triples are independent, so generators
//! can evaluate nodes or trials in any order.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Lanes separate the uses of one master seed.
pub mod lane {
    pub const ALGORITHM: u64 = 1;
    pub const INSTANCE: u64 = 2;
    pub const TREE: u64 = 3;
    pub const SWEEP: u64 = 4;
    pub const CORPUS: u64 = 5;
}

/// Deterministic generator for the triple `(seed, lane, counter)`.
pub fn keyed(seed: u64, lane: u64, counter: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&lane.to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(counter);
    rng
}

/// A child seed derived from `(seed, lane, counter)`.
pub fn derive_seed(seed: u64, lane: u64, counter: u64) -> u64 {
    keyed(seed, lane, counter).next_u64()
}

/// Plain seeded generator.
pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
