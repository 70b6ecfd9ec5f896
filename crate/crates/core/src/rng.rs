//! Seeded random-number streams.
//!
//! Everything stochastic in this crate draws from ChaCha streams derived from
//! a `(seed, stream)` pair. Units of work that may run in parallel (replicates,
//! per-bag noise draws) each get their own stream, so results are independent
//! of scheduling and worker count.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// RNG for the main stream of a seed.
pub fn master_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent substream `stream` of `seed`.
pub fn substream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
