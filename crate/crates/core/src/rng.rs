//! Seedable, splittable random streams.
//!
//! Every random draw in the crate comes from a ChaCha8 stream keyed by
//! `(master seed, role, index)`. Streams for different roles or indices are
//! independent, so adding a new consumer never shifts the draws seen by an
//! existing one.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// What a stream is used for. The discriminant is part of the stream key and
/// must never be renumbered.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum Role {
    Data = 1,
    ShuffleAssign = 2,
    ShufflePermute = 3,
    ShuffleWithinCache = 4,
    Sample = 5,
    ShuffleSeed = 6,
    Bench = 7,
}

pub fn stream(master: u64, role: Role, index: u64) -> StreamRng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&master.to_le_bytes());
    key[8..16].copy_from_slice(&(role as u64).to_le_bytes());
    key[16..24].copy_from_slice(&index.to_le_bytes());
    ChaCha8Rng::from_seed(key)
}

/// Derive a child master seed, e.g. a per-replication shuffle seed.
pub fn derive_seed(master: u64, role: Role, index: u64) -> u64 {
    use rand::RngCore;
    stream(master, role, index).next_u64()
}
