//! Seeded random streams.
//!
//! Every consumer of randomness in a training run draws from its own
//! ChaCha stream derived from the run seed, so enabling one loss term
//! never shifts the random numbers seen by another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Named stream identifiers.
pub mod streams {
    pub const INIT_EXTRACTOR: u64 = 1;
    pub const INIT_TARGET_HEAD: u64 = 2;
    pub const INIT_SS_HEAD: u64 = 3;
    pub const DROPOUT_SUPERVISED: u64 = 4;
    pub const DROPOUT_ADV: u64 = 6;
    pub const TASK: u64 = 7;
    pub const ATTACK_SETS: u64 = 8;
    pub const SURROGATE: u64 = 9;
    pub const PARTITION: u64 = 10;
    pub const EVAL_TARGETS: u64 = 11;
}

pub fn stream(seed: u64, stream: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
