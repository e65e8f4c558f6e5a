use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// 128-bit hash used for node identifiers and rendezvous keys: the first 16
/// bytes of SHA-256, read big-endian.
pub fn hash128(bytes: &[u8]) -> u128 {
    let digest = Sha256::digest(bytes);
    let mut out = [0u8; 16];
    out.copy_from_slice(&digest[..16]);
    u128::from_be_bytes(out)
}

/// Position on the 2^128 identifier ring.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NodeId(pub u128);

impl NodeId {
    pub fn from_name(name: &str) -> Self {
        NodeId(hash128(name.as_bytes()))
    }

    /// Key derived from this id (hash of its big-endian bytes).
    pub fn hashed(self) -> u128 {
        hash128(&self.0.to_be_bytes())
    }

    pub fn raw(self) -> u128 {
        self.0
    }

    /// Digit `index` (most significant first) for digits of `bits` bits.
    pub fn digit(self, index: u32, bits: u32) -> usize {
        digit_of(self.0, index, bits)
    }

    pub fn ring_distance(self, key: u128) -> u128 {
        ring_distance(self.0, key)
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:032x}", self.0)
    }
}

impl fmt::Debug for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "NodeId({:032x})", self.0)
    }
}

pub fn digit_of(value: u128, index: u32, bits: u32) -> usize {
    let shift = 128 - bits * (index + 1);
    ((value >> shift) & ((1u128 << bits) - 1)) as usize
}

/// Number of leading `bits`-bit digits shared by `a` and `b`.
pub fn shared_prefix_len(a: u128, b: u128, bits: u32) -> u32 {
    (a ^ b).leading_zeros() / bits
}

pub fn ring_distance(a: u128, b: u128) -> u128 {
    let d = a.wrapping_sub(b);
    d.min(b.wrapping_sub(a))
}

/// Inclusive id range of routing-table cell `(row, col)` for `owner`.
pub fn cell_range(owner: u128, row: u32, col: usize, bits: u32) -> (u128, u128) {
    let kept = bits * row;
    let free = 128 - bits * (row + 1);
    let prefix = if kept == 0 {
        0
    } else {
        owner & (!0u128 << (128 - kept))
    };
    let lo = prefix | ((col as u128) << free);
    let span = if free == 0 { 0 } else { (1u128 << free) - 1 };
    (lo, lo | span)
}
