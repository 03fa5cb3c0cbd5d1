//! Counter-based random streams.
//!
//! Every replicate owns a handful of independent ChaCha8 streams, addressed
//! by `(master seed, replicate, purpose)`. Two streams never coincide because
//! the 64-bit stream word is a bijective function of `(replicate, purpose)`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// Algorithm identifier written into run manifests.
pub const RNG_ALGORITHM: &str = "ChaCha8Rng(rand_chacha 0.9) seed_from_u64(master) + set_stream(4*replicate + purpose)";

const PURPOSES: u64 = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    Jump = 0,
    Diffusion = 1,
    Irradiation = 2,
    Initial = 3,
}

/// Raw stream constructor: `stream_id` is used verbatim as the ChaCha stream.
pub fn stream(master_seed: u64, stream_id: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(stream_id);
    rng
}

/// Stream word for a replicate/purpose pair.
pub fn stream_id(replicate: u64, purpose: Purpose) -> u64 {
    assert!(replicate < u64::MAX / PURPOSES, "replicate index out of range");
    replicate * PURPOSES + purpose as u64
}

pub fn replicate_stream(master_seed: u64, replicate: u64, purpose: Purpose) -> SimRng {
    stream(master_seed, stream_id(replicate, purpose))
}

/// The streams one replicate consumes.
#[derive(Clone, Debug)]
pub struct ReplicateStreams {
    pub jump: SimRng,
    pub diffusion: SimRng,
    pub irradiation: SimRng,
    pub initial: SimRng,
}

impl ReplicateStreams {
    pub fn new(master_seed: u64, replicate: u64) -> Self {
        Self {
            jump: replicate_stream(master_seed, replicate, Purpose::Jump),
            diffusion: replicate_stream(master_seed, replicate, Purpose::Diffusion),
            irradiation: replicate_stream(master_seed, replicate, Purpose::Irradiation),
            initial: replicate_stream(master_seed, replicate, Purpose::Initial),
        }
    }
}
