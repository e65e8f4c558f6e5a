//! Systematic Reed-Solomon over GF(2^8). The generator is an n x m
//! Vandermonde matrix times the inverse of its top m x m block, so the
//! first m fragments are the data blocks themselves and any m rows are
//! invertible.

use serde::{Deserialize, Serialize};

use super::gf256;
use super::RecoveryError;

pub const HEADER_LEN: usize = 13;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErasureConfig {
    pub m: usize,
    pub k: usize,
}

impl ErasureConfig {
    pub fn new(m: usize, k: usize) -> Result<Self, RecoveryError> {
        let cfg = Self { m, k };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn n(&self) -> usize {
        self.m + self.k
    }

    pub fn validate(&self) -> Result<(), RecoveryError> {
        if self.m == 0 || self.k == 0 {
            return Err(RecoveryError::Config(format!(
                "m and k must be positive (m = {}, k = {})",
                self.m, self.k
            )));
        }
        if self.n() > 255 {
            return Err(RecoveryError::FieldSize(self.n()));
        }
        Ok(())
    }

    /// Bytes per fragment for a state of `len` bytes.
    pub fn fragment_len(&self, len: usize) -> usize {
        len.div_ceil(self.m)
    }

    /// Row `i` of the systematic generator.
    fn generator(&self) -> Vec<Vec<u8>> {
        let vander: Vec<Vec<u8>> = (0..self.n())
            .map(|i| (0..self.m).map(|j| gf256::pow(i as u8, j)).collect())
            .collect();
        let top_inv = gf256::invert(&vander[..self.m])
            .expect("Vandermonde rows with distinct points are independent");
        gf256::mat_mul(&vander, &top_inv)
    }
}

/// One encoded block with the header needed to strip padding and detect
/// fragments from different checkpoints.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fragment {
    pub index: u8,
    pub epoch: u32,
    pub state_len: u64,
    pub data: Vec<u8>,
}

impl Fragment {
    /// 8-byte length, 4-byte epoch, 1-byte index (big-endian), then data.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + self.data.len());
        out.extend_from_slice(&self.state_len.to_be_bytes());
        out.extend_from_slice(&self.epoch.to_be_bytes());
        out.push(self.index);
        out.extend_from_slice(&self.data);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, RecoveryError> {
        if bytes.len() < HEADER_LEN {
            return Err(RecoveryError::Malformed(format!(
                "{} bytes is shorter than the header",
                bytes.len()
            )));
        }
        let state_len = u64::from_be_bytes(bytes[0..8].try_into().expect("8 bytes"));
        let epoch = u32::from_be_bytes(bytes[8..12].try_into().expect("4 bytes"));
        Ok(Self {
            index: bytes[12],
            epoch,
            state_len,
            data: bytes[HEADER_LEN..].to_vec(),
        })
    }
}

pub fn encode(
    state: &[u8],
    cfg: ErasureConfig,
    epoch: u32,
) -> Result<Vec<Fragment>, RecoveryError> {
    cfg.validate()?;
    if state.is_empty() {
        return Err(RecoveryError::EmptyState);
    }
    let len = cfg.fragment_len(state.len());
    let mut blocks: Vec<Vec<u8>> = (0..cfg.m)
        .map(|i| {
            let start = (i * len).min(state.len());
            let end = ((i + 1) * len).min(state.len());
            let mut b = state[start..end].to_vec();
            b.resize(len, 0);
            b
        })
        .collect();
    let gen = cfg.generator();
    for row in &gen[cfg.m..] {
        let mut parity = vec![0u8; len];
        for (c, block) in row.iter().zip(&blocks[..cfg.m]) {
            gf256::mul_add(&mut parity, block, *c);
        }
        blocks.push(parity);
    }
    Ok(blocks
        .into_iter()
        .enumerate()
        .map(|(i, data)| Fragment {
            index: i as u8,
            epoch,
            state_len: state.len() as u64,
            data,
        })
        .collect())
}

pub fn decode(fragments: &[Fragment], cfg: ErasureConfig) -> Result<Vec<u8>, RecoveryError> {
    cfg.validate()?;
    let first = fragments
        .first()
        .ok_or(RecoveryError::InsufficientFragments {
            have: 0,
            need: cfg.m,
        })?;
    if fragments.iter().any(|f| f.epoch != first.epoch) {
        return Err(RecoveryError::MixedEpoch);
    }
    let len = first.data.len();
    for f in fragments {
        if f.index as usize >= cfg.n() || f.data.len() != len || f.state_len != first.state_len {
            return Err(RecoveryError::Malformed(format!(
                "fragment {} does not belong to this code",
                f.index
            )));
        }
    }
    if first.state_len as usize > len * cfg.m {
        return Err(RecoveryError::Malformed(
            "state length exceeds the fragment payload".into(),
        ));
    }
    // First fragment per index, ascending.
    let mut chosen: Vec<&Fragment> = Vec::new();
    let mut by_index: Vec<&Fragment> = fragments.iter().collect();
    by_index.sort_by_key(|f| f.index);
    for f in by_index {
        if chosen.last().is_none_or(|c| c.index != f.index) {
            chosen.push(f);
        }
    }
    if chosen.len() < cfg.m {
        return Err(RecoveryError::InsufficientFragments {
            have: chosen.len(),
            need: cfg.m,
        });
    }
    // Data fragments are preferred since they need no arithmetic.
    chosen.sort_by_key(|f| (f.index as usize >= cfg.m, f.index));
    chosen.truncate(cfg.m);

    let mut blocks: Vec<Option<&[u8]>> = vec![None; cfg.m];
    for f in &chosen {
        if (f.index as usize) < cfg.m {
            blocks[f.index as usize] = Some(&f.data);
        }
    }
    let mut rebuilt: Vec<(usize, Vec<u8>)> = Vec::new();
    if blocks.iter().any(Option::is_none) {
        let gen = cfg.generator();
        let sub: Vec<Vec<u8>> = chosen
            .iter()
            .map(|f| gen[f.index as usize].clone())
            .collect();
        let inv = gf256::invert(&sub).expect("any m generator rows are independent");
        for (j, _) in blocks.iter().enumerate().filter(|(_, b)| b.is_none()) {
            let mut out = vec![0u8; len];
            for (c, f) in inv[j].iter().zip(&chosen) {
                gf256::mul_add(&mut out, &f.data, *c);
            }
            rebuilt.push((j, out));
        }
    }
    let mut state = Vec::with_capacity(len * cfg.m);
    for (j, b) in blocks.iter().enumerate() {
        match b {
            Some(data) => state.extend_from_slice(data),
            None => {
                let (_, data) = rebuilt
                    .iter()
                    .find(|(i, _)| *i == j)
                    .expect("rebuilt above");
                state.extend_from_slice(data);
            }
        }
    }
    state.truncate(first.state_len as usize);
    Ok(state)
}
