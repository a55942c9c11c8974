//! The keyed hash family shared by every sketch mechanism.
//!
//! Hash `j` of the family maps object `x` to a bucket in `[0, m)`:
//!
//! ```text
//! key    = mix64(hash_seed ^ 0x6a09e667f3bcc909)
//! word   = (j << 32) | x
//! digest = mix64(key ^ mix64(word))
//! bucket = (digest * m) >> 64          (128-bit multiply)
//! ```
//!
//! `mix64` is the SplitMix64 finalizer (Stafford's "Mix13" constants). The
//! construction is a fixed 64-bit keyed mixing function, so buckets are
//! identical on every platform and no per-hash tables are stored. It stands
//! in for a family of fully random functions; it is not three-wise
//! independent in any provable sense.

/// SplitMix64 finalizer.
#[inline]
pub const fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

const KEY_SALT: u64 = 0x6a09_e667_f3bc_c909;

/// A family of `num_hashes` functions from objects to `[0, m)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HashFamily {
    key: u64,
    m: u32,
    num_hashes: u32,
    identity: bool,
}

impl HashFamily {
    pub fn keyed(hash_seed: u64, m: u32, num_hashes: u32) -> Self {
        Self {
            key: mix64(hash_seed ^ KEY_SALT),
            m,
            num_hashes,
            identity: false,
        }
    }

    /// The single bijective "hash" used by the hash-free CMS variant.
    pub fn identity(m: u32) -> Self {
        Self {
            key: 0,
            m,
            num_hashes: 1,
            identity: true,
        }
    }

    pub fn m(&self) -> u32 {
        self.m
    }

    pub fn num_hashes(&self) -> u32 {
        self.num_hashes
    }

    pub fn is_identity(&self) -> bool {
        self.identity
    }

    /// Bucket of `object` under hash `hash_index`. Callers guarantee both
    /// indices are in range.
    #[inline]
    pub fn bucket(&self, hash_index: u32, object: u32) -> u32 {
        if self.identity {
            return object;
        }
        let word = ((hash_index as u64) << 32) | object as u64;
        let digest = mix64(self.key ^ mix64(word));
        ((digest as u128 * self.m as u128) >> 64) as u32
    }
}
