//! Experiment definition and key-labeled shot storage.
//!
//! A measurement record is `2n` bits `D_1..D_2n`: the first `n` bits are
//! register `a`, the last `n` register `b`, little-endian within each
//! register. Internally a record is bit-packed into a `u16` pattern with
//! `D_i` at bit position `i - 1`, so the pattern integer equals
//! `u + 2^n * v` for the decoded register values `(u, v)`.

use alloc::format;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::error::CoreError;

/// Register width, key set, and per-key shot budget of an experiment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    /// Register width in bits; each shot carries `2n` measured bits.
    pub n: usize,
    /// Ordered list of distinct key labels, each in `[0, 2^n)`.
    pub keys: Vec<u32>,
    /// Shots generated per key by the simulator.
    pub shots_per_key: usize,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            n: 4,
            keys: alloc::vec![1, 3, 5, 7, 2, 4, 8, 12],
            shots_per_key: 1024,
        }
    }
}

impl ExperimentSpec {
    pub fn new(n: usize, keys: Vec<u32>, shots_per_key: usize) -> Result<Self, CoreError> {
        let spec = Self {
            n,
            keys,
            shots_per_key,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), CoreError> {
        if !(1..=8).contains(&self.n) {
            return Err(CoreError::InvalidSpec(format!(
                "register width must be in 1..=8, got {}",
                self.n
            )));
        }
        if self.keys.is_empty() {
            return Err(CoreError::InvalidSpec("key list is empty".into()));
        }
        if self.shots_per_key == 0 {
            return Err(CoreError::InvalidSpec("shots_per_key must be positive".into()));
        }
        let modulus = self.modulus();
        for (i, &k) in self.keys.iter().enumerate() {
            if u64::from(k) >= u64::from(modulus) {
                return Err(CoreError::InvalidSpec(format!(
                    "key {k} out of range for n={}",
                    self.n
                )));
            }
            if self.keys[..i].contains(&k) {
                return Err(CoreError::InvalidSpec(format!("duplicate key {k}")));
            }
        }
        Ok(())
    }

    /// Bits per shot (`2n`).
    pub fn bit_count(&self) -> usize {
        2 * self.n
    }

    /// `2^n`, the register modulus.
    pub fn modulus(&self) -> u32 {
        1 << self.n
    }

    /// `4^n`, the number of distinct `(u, v)` outcomes.
    pub fn outcome_count(&self) -> usize {
        1 << self.bit_count()
    }

    /// Position of `key` in the key list.
    pub fn key_index(&self, key: u32) -> Option<usize> {
        self.keys.iter().position(|&k| k == key)
    }
}

/// One measurement record: a key label and its packed bits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Shot {
    pub key: u32,
    /// Bits `D_1..D_2n` packed with `D_i` at position `i - 1`.
    pub pattern: u16,
}

impl Shot {
    /// Pack an ordered 0/1 bit sequence. Errors on wrong length or non-binary values.
    pub fn from_bits(key: u32, bits: &[u8], bit_count: usize) -> Result<Self, CoreError> {
        if bits.len() != bit_count {
            return Err(CoreError::MalformedShot {
                expected: bit_count,
                got: bits.len(),
            });
        }
        let mut pattern = 0u16;
        for (i, &b) in bits.iter().enumerate() {
            match b {
                0 => {}
                1 => pattern |= 1 << i,
                _ => {
                    return Err(CoreError::InvalidParam(format!(
                        "bit value {b} at position {} is not 0/1",
                        i + 1
                    )))
                }
            }
        }
        Ok(Self { key, pattern })
    }

    /// Value of `D_i` with 1-based index `i`.
    pub fn bit(&self, i: usize) -> u8 {
        ((self.pattern >> (i - 1)) & 1) as u8
    }

    /// Unpack to the ordered bit sequence `D_1..D_2n`.
    pub fn bits(&self, bit_count: usize) -> Vec<u8> {
        (0..bit_count).map(|i| ((self.pattern >> i) & 1) as u8).collect()
    }
}

/// Shots grouped by key, in spec key order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    spec: ExperimentSpec,
    shots_by_key: Vec<Vec<u16>>,
}

impl Dataset {
    /// Build from per-key pattern groups aligned with `spec.keys`.
    pub fn from_groups(spec: ExperimentSpec, shots_by_key: Vec<Vec<u16>>) -> Result<Self, CoreError> {
        spec.validate()?;
        if shots_by_key.len() != spec.keys.len() {
            return Err(CoreError::InvalidParam(format!(
                "expected {} key groups, got {}",
                spec.keys.len(),
                shots_by_key.len()
            )));
        }
        let limit = spec.outcome_count() as u32;
        for (gi, group) in shots_by_key.iter().enumerate() {
            if group.is_empty() {
                return Err(CoreError::InvalidParam(format!(
                    "key {} group is empty",
                    spec.keys[gi]
                )));
            }
            if let Some(&p) = group.iter().find(|&&p| u32::from(p) >= limit) {
                return Err(CoreError::MalformedShot {
                    expected: spec.bit_count(),
                    got: 16 - p.leading_zeros() as usize,
                });
            }
        }
        Ok(Self { spec, shots_by_key })
    }

    /// Group shots (in any order) by their key labels; keys must be in the spec.
    pub fn from_shots(spec: ExperimentSpec, shots: &[Shot]) -> Result<Self, CoreError> {
        spec.validate()?;
        let mut groups: Vec<Vec<u16>> = alloc::vec![Vec::new(); spec.keys.len()];
        for shot in shots {
            let gi = spec
                .key_index(shot.key)
                .ok_or(CoreError::UnknownKey { key: shot.key })?;
            groups[gi].push(shot.pattern);
        }
        Self::from_groups(spec, groups)
    }

    pub fn spec(&self) -> &ExperimentSpec {
        &self.spec
    }

    pub fn group_sizes(&self) -> Vec<usize> {
        self.shots_by_key.iter().map(Vec::len).collect()
    }

    pub fn min_group_size(&self) -> usize {
        self.shots_by_key.iter().map(Vec::len).min().unwrap_or(0)
    }

    pub fn total_shots(&self) -> usize {
        self.shots_by_key.iter().map(Vec::len).sum()
    }

    /// Patterns for the key group at `key_index`.
    pub fn group(&self, key_index: usize) -> &[u16] {
        &self.shots_by_key[key_index]
    }

    /// Iterate all shots in storage order (grouped by key, spec key order).
    pub fn shots(&self) -> impl Iterator<Item = Shot> + '_ {
        self.spec
            .keys
            .iter()
            .zip(&self.shots_by_key)
            .flat_map(|(&key, group)| group.iter().map(move |&pattern| Shot { key, pattern }))
    }

    /// Flattened patterns and key-group indices, aligned with [`Dataset::shots`] order.
    pub fn flattened(&self) -> (Vec<u16>, Vec<usize>) {
        let total = self.total_shots();
        let mut patterns = Vec::with_capacity(total);
        let mut labels = Vec::with_capacity(total);
        for (gi, group) in self.shots_by_key.iter().enumerate() {
            patterns.extend_from_slice(group);
            labels.extend(core::iter::repeat_n(gi, group.len()));
        }
        (patterns, labels)
    }

    /// Restrict to a subset of keys; downstream metrics then use the smaller key set.
    ///
    /// Keys keep their spec order. Errors if the subset is empty or contains a
    /// key that is not in the spec.
    pub fn restrict_keys(&self, keys: &[u32]) -> Result<Dataset, CoreError> {
        if keys.is_empty() {
            return Err(CoreError::InvalidParam("key slice is empty".into()));
        }
        for &k in keys {
            if self.spec.key_index(k).is_none() {
                return Err(CoreError::UnknownKey { key: k });
            }
        }
        let mut kept_keys = Vec::new();
        let mut kept_groups = Vec::new();
        for (gi, &k) in self.spec.keys.iter().enumerate() {
            if keys.contains(&k) {
                kept_keys.push(k);
                kept_groups.push(self.shots_by_key[gi].clone());
            }
        }
        let spec = ExperimentSpec {
            n: self.spec.n,
            keys: kept_keys,
            shots_per_key: self.spec.shots_per_key,
        };
        Dataset::from_groups(spec, kept_groups)
    }
}
