//! Deterministic RNG substreams.
//!
//! Bundle generation and perturbation analysis parallelize over ordinals;
//! each ordinal gets its own ChaCha stream derived from (seed, ordinal) so
//! results are independent of the parallel schedule.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// RNG for a (seed, ordinal) substream.
pub fn substream(seed: u64, ordinal: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(ordinal.wrapping_add(1));
    rng
}

/// RNG for a top-level seed.
pub fn stream(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
