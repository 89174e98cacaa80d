// SPDX-License-Identifier: Apache-2.0

//! 65,536-entry product tables indexed by `(a << 8) | b`.
//!
//! On disk a table is exactly 131,072 bytes of little-endian `u16`, no header.

use std::path::Path;

use crate::error::NnError;
use crate::multiplier::Multiplier;

pub const LUT_ENTRIES: usize = 1 << 16;

#[derive(Clone, PartialEq, Eq)]
pub struct ProductLut {
    entries: Box<[u16]>,
}

impl std::fmt::Debug for ProductLut {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ProductLut")
            .field("entries", &self.entries.len())
            .finish()
    }
}

impl ProductLut {
    pub fn from_fn(mut f: impl FnMut(u8, u8) -> u16) -> Self {
        let entries = (0..LUT_ENTRIES)
            .map(|i| f((i >> 8) as u8, i as u8))
            .collect();
        Self { entries }
    }

    pub fn exact() -> Self {
        Self::from_fn(|a, b| a as u16 * b as u16)
    }

    pub fn from_multiplier(m: &Multiplier) -> Self {
        Self::from_fn(|a, b| m.evaluate(a, b))
    }

    pub fn from_entries(entries: Vec<u16>) -> Result<Self, NnError> {
        if entries.len() != LUT_ENTRIES {
            return Err(NnError::LutSize(entries.len()));
        }
        Ok(Self {
            entries: entries.into_boxed_slice(),
        })
    }

    #[inline]
    pub fn get(&self, a: u8, b: u8) -> u16 {
        self.entries[(a as usize) << 8 | b as usize]
    }

    pub fn entries(&self) -> &[u16] {
        &self.entries
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        self.entries.iter().flat_map(|v| v.to_le_bytes()).collect()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, NnError> {
        if bytes.len() != 2 * LUT_ENTRIES {
            return Err(NnError::LutSize(bytes.len() / 2));
        }
        Self::from_entries(
            bytes
                .chunks_exact(2)
                .map(|c| u16::from_le_bytes([c[0], c[1]]))
                .collect(),
        )
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, NnError> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}
