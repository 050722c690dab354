//! Seeded random streams.
//!
//! Every consumer derives its generator from `(seed, stream)` with ChaCha8,
//! whose block counter makes streams independent and platform-stable.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Recorded in simulation output so results can be regenerated elsewhere.
pub const ALGORITHM: &str = "rand_chacha::ChaCha8Rng::seed_from_u64(seed) with set_stream((replicate << 8) | purpose)";

/// What a stream is used for; part of the stream id.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum Purpose {
    Data = 1,
    Candidates = 2,
    Probe = 3,
    Covariates = 4,
}

pub fn stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn stream_id(replicate: u64, purpose: Purpose) -> u64 {
    (replicate << 8) | purpose as u64
}

pub fn replicate_stream(seed: u64, replicate: u64, purpose: Purpose) -> ChaCha8Rng {
    stream(seed, stream_id(replicate, purpose))
}
