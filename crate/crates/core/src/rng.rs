//! Seeded random streams. Every consumer of randomness draws from its own
//! ChaCha stream derived from the run seed, so adding draws in one place never
//! perturbs another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::NodeId;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Placement,
    Traffic,
    Loss,
    Mobility(NodeId),
}

impl Stream {
    fn id(self) -> u64 {
        match self {
            Stream::Placement => 1,
            Stream::Traffic => 2,
            Stream::Loss => 3,
            Stream::Mobility(node) => (1 << 32) | u64::from(node.0),
        }
    }
}

pub fn stream(seed: u64, which: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(which.id());
    rng
}
