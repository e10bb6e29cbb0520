//! Seeded random streams.
//!
//! Every stochastic operation in the crate draws from a ChaCha8 stream built
//! here. ChaCha is counter based, so a `(seed, stream)` pair names an
//! independent sequence and replays bit-identically on every platform.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Stream ids used by the simulation and splitting code.
pub mod streams {
    pub const SPLIT: u64 = 1;
    pub const TRAIN: u64 = 2;
    pub const TEST: u64 = 3;
    pub const FOLDS: u64 = 4;
    pub const TWO_STEP_FOLDS: u64 = 5;
}

pub fn stream(seed: u64, stream: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Seed of replication `run` under a base seed.
pub fn child_seed(seed: u64, run: u64) -> u64 {
    seed ^ run
}
