//! Per-chunk random number streams.
//!
//! Chunk `i` of a run with master seed `s` draws from a xoshiro256++ generator
//! seeded with `mix(s, i)`, so results do not depend on how chunks are spread
//! over worker threads.

use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;

pub type WalkRng = Xoshiro256PlusPlus;

/// Paths per chunk.
pub const CHUNK: u64 = 1 << 16;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stream key for chunk `chunk` of master seed `seed`.
pub fn mix(seed: u64, chunk: u64) -> u64 {
    splitmix(splitmix(seed) ^ chunk.wrapping_mul(0xD1B5_4A32_D192_ED03))
}

pub fn chunk_rng(seed: u64, chunk: u64) -> WalkRng {
    Xoshiro256PlusPlus::seed_from_u64(mix(seed, chunk))
}
