//! Seeded random streams.
//!
//! Every stochastic path draws from ChaCha20 (`rand_chacha` 0.9), keyed by
//! `seed_from_u64(seed)` with the ChaCha stream id set to the replication
//! index. Integer ranges use `rand` 0.9's `random_range`. A reimplementation
//! that reproduces this recipe reproduces the streams bit for bit.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

/// Identifier written into simulator output metadata.
pub const GENERATOR_ID: &str = "chacha20/rand_chacha-0.9/seed_from_u64+stream=replication";

pub type StreamRng = ChaCha20Rng;

/// Independent stream for replication `index` under `seed`.
pub fn stream(seed: u64, index: u64) -> StreamRng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}
