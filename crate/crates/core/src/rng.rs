//! Seeded random streams.
//!
//! Every stochastic operation draws from an explicit [`Stream`] derived from
//! `(master_seed, purpose, index)`. The purpose tag and master seed select a
//! ChaCha8 key; the index selects the 64-bit ChaCha stream under that key.
//! Streams for different users therefore never overlap, and adding users
//! leaves existing streams untouched.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::hash::mix64;

/// The generator used throughout the crate.
pub type Stream = ChaCha8Rng;

/// Well-known purpose tags.
pub mod purpose {
    pub const USER: &str = "user";
    pub const POPULARITY: &str = "popularity";
    pub const EXTERNAL: &str = "external";
    pub const SPLIT: &str = "split";
    pub const GENERIC: &str = "generic";
}

fn fnv1a(tag: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in tag.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Derive the stream for `(master_seed, purpose, index)`.
pub fn stream(master_seed: u64, purpose: &str, index: u64) -> Stream {
    let mut state = mix64(master_seed) ^ fnv1a(purpose);
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
        chunk.copy_from_slice(&mix64(state).to_le_bytes());
    }
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(index);
    rng
}
