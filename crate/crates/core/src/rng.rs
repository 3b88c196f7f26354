//! Deterministic random streams.
//!
//! A single master seed drives every simulation. Each unit of work (an SNR
//! point and a trial index, say) gets its own ChaCha stream so results do not
//! depend on how trials are scheduled across workers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// Rng for the given master seed and a two-level work identifier.
///
/// `minor` must stay below 2^40 (trial indices); `major` indexes sweep points.
pub fn stream(seed: u64, major: u64, minor: u64) -> SimRng {
    debug_assert!(minor < 1 << 40);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((major << 40) ^ minor);
    rng
}

/// Rng seeded directly from `seed`.
pub fn seeded(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}
