//! Packed bit vectors with a fixed little-endian layout.
//!
//! Bit `i` lives in word `i / 64` at position `i % 64`. The byte view used for
//! serialization is the little-endian byte sequence of those words, truncated
//! to `ceil(len / 8)` bytes, so bit `i` is bit `i % 8` of byte `i / 8`.

use alloc::vec;
use alloc::vec::Vec;

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BitVector {
    len: usize,
    words: Vec<u64>,
}

impl BitVector {
    pub fn zeros(len: usize) -> Self {
        Self {
            len,
            words: vec![0; len.div_ceil(64)],
        }
    }

    pub fn one_hot(len: usize, position: usize) -> Self {
        let mut v = Self::zeros(len);
        v.set(position, true);
        v
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        debug_assert!(i < self.len);
        (self.words[i >> 6] >> (i & 63)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize, value: bool) {
        assert!(
            i < self.len,
            "bit index {i} out of range for length {}",
            self.len
        );
        let mask = 1u64 << (i & 63);
        if value {
            self.words[i >> 6] |= mask;
        } else {
            self.words[i >> 6] &= !mask;
        }
    }

    #[inline]
    pub fn flip(&mut self, i: usize) {
        assert!(
            i < self.len,
            "bit index {i} out of range for length {}",
            self.len
        );
        self.words[i >> 6] ^= 1u64 << (i & 63);
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Positions of set bits in increasing order.
    pub fn iter_ones(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &word)| {
            let mut w = word;
            core::iter::from_fn(move || {
                if w == 0 {
                    return None;
                }
                let bit = w.trailing_zeros() as usize;
                w &= w - 1;
                Some(wi * 64 + bit)
            })
        })
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    pub fn to_le_bytes(&self) -> Vec<u8> {
        let mut out: Vec<u8> = self.words.iter().flat_map(|w| w.to_le_bytes()).collect();
        out.truncate(self.len.div_ceil(8));
        out
    }

    /// Inverse of [`to_le_bytes`](Self::to_le_bytes). Padding bits past `len`
    /// must be zero.
    pub fn from_le_bytes(len: usize, bytes: &[u8]) -> Result<Self> {
        if bytes.len() != len.div_ceil(8) {
            return Err(Error::Data(alloc::format!(
                "bit vector of length {len} needs {} bytes, got {}",
                len.div_ceil(8),
                bytes.len()
            )));
        }
        let mut v = Self::zeros(len);
        for (i, &b) in bytes.iter().enumerate() {
            v.words[i / 8] |= (b as u64) << (8 * (i % 8));
        }
        if len % 64 != 0 {
            let tail = v.words[len / 64] >> (len % 64);
            if tail != 0 {
                return Err(Error::Data(alloc::format!("bits set beyond length {len}")));
            }
        }
        Ok(v)
    }
}
