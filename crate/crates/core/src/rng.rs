//! Named random streams derived from one master seed.
//!
//! Each consumer gets its own ChaCha stream so that, for example, switching
//! the learning algorithm does not shift the draws used to generate the arm
//! population.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Dataset = 1,
    Environment = 2,
    Sampler = 3,
}

pub fn stream(seed: u64, which: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(which as u64);
    rng
}
