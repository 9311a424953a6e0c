//! Counter-based random streams.
//!
//! Every Monte Carlo replicate gets its own ChaCha8 generator keyed by
//! `(seed, replicate)` with a stream id per purpose, so results never depend
//! on how replicates are scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream ids. Distinct consumers of the same `(seed, replicate)` pair must
/// not share one.
pub mod stream {
    pub const STATISTICS: u64 = 0;
    pub const HC_NULL: u64 = 1;
    pub const SCAN_NULL: u64 = 2;
    pub const MARTINGALE: u64 = 3;
    pub const GAIL_SIMON_NULL: u64 = 4;
}

/// Generator for replicate `rep` of a study seeded with `seed`.
pub fn replicate_rng(seed: u64, rep: u64, stream: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&rep.to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(stream);
    rng
}
