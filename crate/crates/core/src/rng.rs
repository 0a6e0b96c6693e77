//! Seeded random sources. Each consumer draws from its own ChaCha stream
//! derived from the master seed, so adding draws in one place never shifts
//! another consumer's sequence.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// Named sub-streams of a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Scenarios = 1,
    Init = 2,
    Policy = 3,
    Subset = 4,
    Noise = 5,
    Jammer = 6,
    Evaluation = 7,
    Baseline = 8,
}

pub fn stream(seed: u64, which: Stream) -> SimRng {
    sub_stream(seed, which as u64)
}

pub fn sub_stream(seed: u64, id: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}
