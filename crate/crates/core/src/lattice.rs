//! Plug-in mutual information over bit subsets, Möbius inversion, and
//! per-order positive mass.
//!
//! For a key label `K` and measured bits `D_1..D_2n`, the lattice function
//! `g(S) = I(K; D_S)` is evaluated for every nonempty subset `S` with
//! `|S| <= k_max`. Möbius inversion on the subset lattice recovers the
//! irreducible contribution of each subset,
//!
//! ```text
//! f(T) = sum over S subset of T of (-1)^(|T| - |S|) g(S),
//! ```
//!
//! the inverse of the zeta transform `g(S) = sum over T subset of S of f(T)`.
//! Because every subset of `T` is no larger than `T`, truncating at `k_max`
//! leaves all stored `f` values exact. Positive `f` at order 3 and above is
//! synergy: information visible only when those bits are read jointly.
//!
//! Input is an explicitly weighted joint ([`KeyedJoint`]) so the same code
//! path serves empirical counts and exact closed-form distributions.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::CoreError;
use crate::sim::ExactJoint;

/// A nonempty set of measured-bit positions, packed as a mask with bit
/// `i - 1` set when `D_i` is in the subset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BitSubset(pub u16);

impl BitSubset {
    /// Number of bits in the subset.
    pub fn order(self) -> usize {
        self.0.count_ones() as usize
    }

    /// 1-based positions of the member bits.
    pub fn positions(self) -> Vec<usize> {
        (0..16).filter(|i| self.0 >> i & 1 == 1).map(|i| i + 1).collect()
    }

    /// True when the subset stays inside register `a` (bits 1..n) or
    /// register `b` (bits n+1..2n); false when it touches both.
    pub fn is_within_register(self, n: usize) -> bool {
        let a_mask = (1u16 << n) - 1;
        self.0 & a_mask == self.0 || self.0 & !a_mask == self.0
    }
}

/// Weighted joint distribution of (key label, bit pattern).
///
/// Weights need not be normalized; empirical counts, bootstrap multiplicities,
/// and exact probabilities all work.
#[derive(Debug, Clone, PartialEq)]
pub struct KeyedJoint {
    bit_count: usize,
    /// `weights[key_index][pattern]`.
    weights: Vec<Vec<f64>>,
    total: f64,
}

impl KeyedJoint {
    pub fn new(bit_count: usize, weights: Vec<Vec<f64>>) -> Result<Self, CoreError> {
        if bit_count == 0 || bit_count > 16 {
            return Err(CoreError::InvalidParam(format!(
                "bit count must be in 1..=16, got {bit_count}"
            )));
        }
        let patterns = 1usize << bit_count;
        if weights.is_empty() {
            return Err(CoreError::InvalidParam("no key rows".into()));
        }
        let mut total = 0.0;
        for row in &weights {
            if row.len() != patterns {
                return Err(CoreError::InvalidParam(format!(
                    "key row must have {patterns} entries, got {}",
                    row.len()
                )));
            }
            for &w in row {
                if !w.is_finite() || w < 0.0 {
                    return Err(CoreError::InvalidParam(format!("negative or non-finite weight {w}")));
                }
                total += w;
            }
        }
        if total <= 0.0 {
            return Err(CoreError::InvalidParam("all weights are zero".into()));
        }
        Ok(Self {
            bit_count,
            weights,
            total,
        })
    }

    /// Empirical joint of a dataset: weight = shot count.
    pub fn from_dataset(ds: &Dataset) -> Self {
        let bit_count = ds.spec().bit_count();
        let patterns = 1usize << bit_count;
        let mut weights = vec![vec![0.0; patterns]; ds.spec().keys.len()];
        for (ki, row) in weights.iter_mut().enumerate() {
            for &pattern in ds.group(ki) {
                row[pattern as usize] += 1.0;
            }
        }
        let total = ds.total_shots() as f64;
        Self {
            bit_count,
            weights,
            total,
        }
    }

    /// Flat pattern/label pairs (labels are key-group indices); used by
    /// permutation and bootstrap loops that relabel or resample shots.
    pub fn from_labeled_patterns(
        bit_count: usize,
        key_count: usize,
        patterns: &[u16],
        labels: &[usize],
    ) -> Self {
        debug_assert_eq!(patterns.len(), labels.len());
        let size = 1usize << bit_count;
        let mut weights = vec![vec![0.0; size]; key_count];
        for (&pattern, &label) in patterns.iter().zip(labels) {
            weights[label][pattern as usize] += 1.0;
        }
        Self {
            bit_count,
            weights,
            total: patterns.len() as f64,
        }
    }

    /// Closed-form joint with equal key priors.
    pub fn from_exact(joint: &ExactJoint) -> Self {
        let spec = joint.spec();
        let key_count = spec.keys.len();
        let prior = 1.0 / key_count as f64;
        let weights = (0..key_count)
            .map(|ki| joint.row(ki).iter().map(|&p| p * prior).collect())
            .collect();
        Self {
            bit_count: spec.bit_count(),
            weights,
            total: 1.0,
        }
    }

    pub fn bit_count(&self) -> usize {
        self.bit_count
    }

    pub fn key_count(&self) -> usize {
        self.weights.len()
    }
}

/// Plug-in mutual information `I(K; D_S)` in bits.
///
/// Empirical frequencies are treated as the true distribution, with
/// `0 log 0 = 0`. Always in `[0, min(log2 #keys, |S|)]`.
pub fn plugin_mi(joint: &KeyedJoint, subset: BitSubset) -> f64 {
    let mut scratch = vec![0.0; joint.key_count() << subset.order()];
    plugin_mi_with(joint, subset, &projection_table(joint.bit_count, subset), &mut scratch)
}

/// [`plugin_mi`] with caller-provided projection table and scratch buffer.
fn plugin_mi_with(joint: &KeyedJoint, subset: BitSubset, proj: &[u16], sub: &mut [f64]) -> f64 {
    let bins = 1usize << subset.order();
    let keys = joint.key_count();
    debug_assert_eq!(sub.len(), keys * bins);
    sub.fill(0.0);
    for (ki, row) in joint.weights.iter().enumerate() {
        let out = &mut sub[ki * bins..(ki + 1) * bins];
        for (pattern, &w) in row.iter().enumerate() {
            out[proj[pattern] as usize] += w;
        }
    }

    let total = joint.total;
    let mut col = vec![0.0; bins];
    let mut key_mass = vec![0.0; keys];
    for ki in 0..keys {
        for b in 0..bins {
            let w = sub[ki * bins + b];
            col[b] += w;
            key_mass[ki] += w;
        }
    }
    let mut mi = 0.0;
    for ki in 0..keys {
        for b in 0..bins {
            let w = sub[ki * bins + b];
            if w > 0.0 {
                mi += (w / total) * libm::log2(w * total / (key_mass[ki] * col[b]));
            }
        }
    }
    mi.max(0.0)
}

/// Map every full pattern to its packed projection onto `subset`.
fn projection_table(bit_count: usize, subset: BitSubset) -> Vec<u16> {
    let size = 1usize << bit_count;
    let mut table = vec![0u16; size];
    let positions: Vec<usize> = (0..bit_count).filter(|i| subset.0 >> i & 1 == 1).collect();
    for (pattern, entry) in table.iter_mut().enumerate() {
        let mut packed = 0u16;
        for (j, &pos) in positions.iter().enumerate() {
            packed |= (((pattern >> pos) & 1) as u16) << j;
        }
        *entry = packed;
    }
    table
}

/// Real-valued function on the nonempty bit subsets of order `<= k_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeFunction {
    bit_count: usize,
    k_max: usize,
    /// Dense storage indexed by mask; the empty set is fixed at 0 and
    /// entries above the truncation order are unused.
    values: Vec<f64>,
}

impl LatticeFunction {
    pub fn zeroed(bit_count: usize, k_max: usize) -> Result<Self, CoreError> {
        if bit_count == 0 || bit_count > 16 {
            return Err(CoreError::InvalidParam(format!(
                "bit count must be in 1..=16, got {bit_count}"
            )));
        }
        if k_max == 0 || k_max > bit_count {
            return Err(CoreError::InvalidParam(format!(
                "k_max must be in 1..={bit_count}, got {k_max}"
            )));
        }
        Ok(Self {
            bit_count,
            k_max,
            values: vec![0.0; 1 << bit_count],
        })
    }

    pub fn bit_count(&self) -> usize {
        self.bit_count
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }

    pub fn get(&self, subset: BitSubset) -> f64 {
        self.values[subset.0 as usize]
    }

    pub fn set(&mut self, subset: BitSubset, value: f64) {
        debug_assert!(subset.order() <= self.k_max);
        self.values[subset.0 as usize] = value;
    }

    /// Stored subsets in ascending mask order.
    pub fn subsets(&self) -> impl Iterator<Item = BitSubset> + '_ {
        let k_max = self.k_max as u32;
        (1u32..1u32 << self.bit_count)
            .filter(move |m| m.count_ones() <= k_max)
            .map(|m| BitSubset(m as u16))
    }

    /// Number of stored subsets: `C(2n,1) + ... + C(2n,k_max)`.
    pub fn len(&self) -> usize {
        self.subsets().count()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Evaluate `g(S) = I(K; D_S)` for every stored subset.
pub fn compute_g(joint: &KeyedJoint, k_max: usize) -> Result<LatticeFunction, CoreError> {
    let mut g = LatticeFunction::zeroed(joint.bit_count(), k_max)?;
    let mut scratch = vec![0.0; joint.key_count() << k_max];
    for subset in g.subsets().collect::<Vec<_>>() {
        let proj = projection_table(joint.bit_count(), subset);
        let bins = joint.key_count() << subset.order();
        let value = plugin_mi_with(joint, subset, &proj, &mut scratch[..bins]);
        g.set(subset, value);
    }
    Ok(g)
}

/// Möbius inversion: irreducible contributions `f` from cumulative values `g`.
///
/// Exact signed inclusion-exclusion per subset; the truncation never
/// references a subset above `k_max`.
pub fn mobius_invert(g: &LatticeFunction) -> LatticeFunction {
    let mut f = LatticeFunction::zeroed(g.bit_count, g.k_max).expect("same shape as input");
    for t in f.subsets().collect::<Vec<_>>() {
        let order_t = t.order();
        let mut acc = 0.0;
        // iterate all nonempty submasks of t
        let mut s = t.0;
        loop {
            let sign = if (order_t - BitSubset(s).order()).is_multiple_of(2) {
                1.0
            } else {
                -1.0
            };
            acc += sign * g.get(BitSubset(s));
            s = (s - 1) & t.0;
            if s == 0 {
                break;
            }
        }
        f.set(t, acc);
    }
    f
}

/// Zeta transform, the inverse of [`mobius_invert`]: `g(S) = sum of f over subsets of S`.
pub fn zeta_transform(f: &LatticeFunction) -> LatticeFunction {
    let mut g = LatticeFunction::zeroed(f.bit_count, f.k_max).expect("same shape as input");
    for t in g.subsets().collect::<Vec<_>>() {
        let mut acc = 0.0;
        let mut s = t.0;
        loop {
            acc += f.get(BitSubset(s));
            s = (s - 1) & t.0;
            if s == 0 {
                break;
            }
        }
        g.set(t, acc);
    }
    g
}

/// Positive Möbius mass of one interaction order, split by register span.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderMass {
    pub order: usize,
    /// Sum of positive `f` over subsets of this order.
    pub positive_mass: f64,
    /// Share from subsets inside a single register.
    pub within_register: f64,
    /// Share from subsets touching both registers.
    pub cross_register: f64,
    /// `cross_register / positive_mass`, or 0 when there is no positive mass.
    pub cross_fraction: f64,
}

/// Per-order positive mass of `f`, partitioned within/cross for register width `n`.
pub fn positive_mass(f: &LatticeFunction, n: usize) -> Vec<OrderMass> {
    debug_assert_eq!(f.bit_count(), 2 * n);
    let mut within = vec![0.0; f.k_max + 1];
    let mut cross = vec![0.0; f.k_max + 1];
    for subset in f.subsets() {
        let value = f.get(subset);
        if value > 0.0 {
            if subset.is_within_register(n) {
                within[subset.order()] += value;
            } else {
                cross[subset.order()] += value;
            }
        }
    }
    (1..=f.k_max)
        .map(|order| {
            let w = within[order];
            let c = cross[order];
            let total = w + c;
            OrderMass {
                order,
                positive_mass: total,
                within_register: w,
                cross_register: c,
                cross_fraction: if total > 0.0 { c / total } else { 0.0 },
            }
        })
        .collect()
}

/// Order-`k_max` positive synergy score: top-order positive Möbius mass, in bits.
pub fn targeted_synergy(joint: &KeyedJoint, k_max: usize) -> Result<f64, CoreError> {
    let g = compute_g(joint, k_max)?;
    let f = mobius_invert(&g);
    let n = joint.bit_count() / 2;
    let masses = positive_mass(&f, n);
    Ok(masses.last().map(|m| m.positive_mass).unwrap_or(0.0))
}
