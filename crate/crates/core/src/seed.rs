//! Seed derivation. Every random stream in the crate is a ChaCha8 generator
//! seeded from a root seed mixed with a stream identifier, so parallel and
//! serial runs draw identical numbers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mix a root seed with a stream id.
pub fn derive(seed: u64, stream: u64) -> u64 {
    splitmix64(splitmix64(seed) ^ stream.wrapping_mul(GOLDEN).rotate_left(17))
}

/// Stable 64-bit FNV-1a hash of a label, used to name per-stage streams.
pub fn label(name: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in name.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    h
}

/// Derive a seed for a named stage.
pub fn stage(seed: u64, name: &str) -> u64 {
    derive(seed, label(name))
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    rng(derive(seed, stream))
}
