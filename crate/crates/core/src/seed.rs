//! Deterministic seed plumbing.
//!
//! Every source of randomness in the crate is a [`ChaCha8Rng`] seeded through
//! these helpers. Sub-seeds are derived from a base seed plus an index path
//! (fold, threshold index, grid position, ...) with a splitmix64 chain, so a
//! unit of work gets the same stream no matter which thread runs it or in
//! which order. That is what makes parallel runs bit-identical to sequential
//! ones.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds `parts` into `base` one value at a time.
pub fn derive_seed(base: u64, parts: &[u64]) -> u64 {
    let mut state = splitmix64(base);
    for &p in parts {
        state = splitmix64(state ^ p.wrapping_mul(0xA24B_AED4_963E_E407));
    }
    state
}

/// The crate-wide generator: portable, documented stream, cheap to seed.
pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Seed-path tags used by the harness so distinct purposes never collide.
pub mod streams {
    /// 70/30 tuning split within a training fold.
    pub const TUNING_SPLIT: u64 = 1;
    /// Threshold-classifier bundle for one fold and one S value.
    pub const AUGMENTER: u64 = 2;
    /// Seeded downstream regressors (random forest).
    pub const REGRESSOR: u64 = 3;
}
