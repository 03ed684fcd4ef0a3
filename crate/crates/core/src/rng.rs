//! Seedable random number generation.
//!
//! Every stochastic operation (initialization, dropout, perturbation, split
//! sampling, synthetic data) draws from an explicitly passed [`Rng`]. The
//! generator is ChaCha with 8 rounds, so a given seed yields the same stream on
//! every platform.

use rand::SeedableRng;

pub use rand::Rng as RngExt;

/// The generator used throughout the crate.
pub type Rng = rand_chacha::ChaCha8Rng;

pub fn seeded(seed: u64) -> Rng {
    Rng::seed_from_u64(seed)
}
