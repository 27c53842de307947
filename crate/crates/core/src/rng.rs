//! Counter-based seed fan-out: one master seed, independent named streams.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

/// Stream families. Each `(family, index)` pair selects a distinct ChaCha stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Task = 1,
    Partition = 2,
    Pretrain = 3,
    Roles = 4,
    Keygen = 5,
    ClientTrain = 6,
    ClientOffset = 7,
    ClientEncrypt = 8,
    Dropout = 9,
    Shuffle = 10,
    GlobalEncrypt = 11,
}

pub fn stream(seed: u64, family: Stream, index: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(((family as u64) << 48) ^ index);
    rng
}

/// Packs up to three small counters into a stream index.
pub fn index(a: u64, b: u64, c: u64) -> u64 {
    (a << 32) ^ (b << 16) ^ c
}
