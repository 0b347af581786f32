//! Seed expansion for randomized checks.
//!
//! A run has one 64-bit seed. Every check owns a fixed 64-bit identifier and
//! draws from the ChaCha8 stream `check_id` of the generator keyed by the run
//! seed, so adding or reordering checks never shifts another check's draws.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn check_rng(seed: u64, check_id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(check_id);
    rng
}
