//! Ridge-hit probability, ridge contrast, confidence intervals, and
//! per-key heatmap grids.
//!
//! Contrast is the observed hit probability over the uniform baseline
//! `2^-n`; proportions get Wilson score intervals and contrast gets a
//! stratified percentile bootstrap (resampling within key groups, which
//! preserves the per-key shot design).

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::CoreError;
use crate::ridge::ridge_hit;
use crate::rng::Stream;

/// Two-sided 95% normal quantile used for all default intervals.
pub const DEFAULT_Z95: f64 = 1.959964;

/// Hit counts under each shot's own key label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeyRidgeCounts {
    pub key: u32,
    pub hits: u64,
    pub count: u64,
    pub p_hit: f64,
}

/// Pooled and per-key ridge statistics with confidence intervals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RidgeStats {
    pub pooled_hits: u64,
    pub total: u64,
    pub p_hit: f64,
    /// `p_hit * 2^n`.
    pub contrast: f64,
    pub per_key: Vec<KeyRidgeCounts>,
    /// Wilson interval for the pooled hit probability.
    pub p_hit_ci: (f64, f64),
    /// Percentile bootstrap interval for the contrast.
    pub contrast_ci: (f64, f64),
}

/// Pooled and per-key ridge-hit fractions, without intervals.
pub fn ridge_hit_probability(ds: &Dataset) -> Result<RidgeStats, CoreError> {
    if ds.total_shots() == 0 {
        return Err(CoreError::EmptyDataset);
    }
    let n = ds.spec().n;
    let mut per_key = Vec::with_capacity(ds.spec().keys.len());
    let mut pooled_hits = 0u64;
    for (ki, &key) in ds.spec().keys.iter().enumerate() {
        let hits = group_hits(ds.group(ki), key, n);
        let count = ds.group(ki).len() as u64;
        pooled_hits += hits;
        per_key.push(KeyRidgeCounts {
            key,
            hits,
            count,
            p_hit: hits as f64 / count as f64,
        });
    }
    let total = ds.total_shots() as u64;
    let p_hit = pooled_hits as f64 / total as f64;
    Ok(RidgeStats {
        pooled_hits,
        total,
        p_hit,
        contrast: p_hit * ds.spec().modulus() as f64,
        per_key,
        p_hit_ci: (p_hit, p_hit),
        contrast_ci: (0.0, 0.0),
    })
}

fn group_hits(patterns: &[u16], key: u32, n: usize) -> u64 {
    let mask = (1u32 << n) - 1;
    patterns
        .iter()
        .filter(|&&p| ridge_hit(key, u32::from(p) & mask, u32::from(p) >> n, n))
        .count() as u64
}

/// Ridge statistics with Wilson and bootstrap intervals filled in.
pub fn ridge_stats(ds: &Dataset, replicates: usize, seed: u64) -> Result<RidgeStats, CoreError> {
    let mut stats = ridge_hit_probability(ds)?;
    stats.p_hit_ci = wilson_interval(stats.pooled_hits, stats.total, DEFAULT_Z95)?;
    stats.contrast_ci = bootstrap_contrast_ci(ds, replicates, seed)?;
    Ok(stats)
}

/// Wilson score interval for a binomial proportion, clipped to `[0, 1]`.
pub fn wilson_interval(successes: u64, trials: u64, z: f64) -> Result<(f64, f64), CoreError> {
    if trials == 0 {
        return Err(CoreError::InvalidParam("wilson interval needs trials >= 1".into()));
    }
    if successes > trials {
        return Err(CoreError::InvalidParam(format!(
            "successes {successes} exceed trials {trials}"
        )));
    }
    if !z.is_finite() || z <= 0.0 {
        return Err(CoreError::InvalidParam(format!("z must be positive, got {z}")));
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * libm::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom;
    // the interval endpoints are exactly 0/1 at the boundary counts
    let lo = if successes == 0 { 0.0 } else { (center - half).max(0.0) };
    let hi = if successes == trials { 1.0 } else { (center + half).min(1.0) };
    Ok((lo, hi))
}

/// Percentile bootstrap (2.5%, 97.5%) of the pooled ridge contrast.
///
/// Each replicate resamples shots with replacement within every key group;
/// replicate `r` consumes only the child stream `derive_seed(seed, r)`.
pub fn bootstrap_contrast_ci(
    ds: &Dataset,
    replicates: usize,
    seed: u64,
) -> Result<(f64, f64), CoreError> {
    if replicates < 100 {
        return Err(CoreError::InvalidParam(format!(
            "bootstrap needs >= 100 replicates, got {replicates}"
        )));
    }
    let values = bootstrap_contrast_values(ds, replicates, seed)?;
    Ok((percentile(&values, 0.025), percentile(&values, 0.975)))
}

/// The raw bootstrap contrast replicates behind [`bootstrap_contrast_ci`].
pub fn bootstrap_contrast_values(
    ds: &Dataset,
    replicates: usize,
    seed: u64,
) -> Result<Vec<f64>, CoreError> {
    if ds.total_shots() == 0 {
        return Err(CoreError::EmptyDataset);
    }
    let n = ds.spec().n;
    let modulus = ds.spec().modulus() as f64;
    let total = ds.total_shots() as f64;
    let mut values = Vec::with_capacity(replicates);
    for r in 0..replicates {
        let mut stream = Stream::derived(seed, r as u64);
        let mut hits = 0u64;
        for (ki, &key) in ds.spec().keys.iter().enumerate() {
            let group = ds.group(ki);
            let mask = (1u32 << n) - 1;
            for _ in 0..group.len() {
                let p = u32::from(group[stream.next_index(group.len())]);
                if ridge_hit(key, p & mask, p >> n, n) {
                    hits += 1;
                }
            }
        }
        values.push(hits as f64 / total * modulus);
    }
    Ok(values)
}

/// Percentile with linear interpolation between order statistics.
pub fn percentile(values: &[f64], q: f64) -> f64 {
    debug_assert!(!values.is_empty() && (0.0..=1.0).contains(&q));
    let mut sorted = values.to_vec();
    sorted.sort_unstable_by(|a, b| a.partial_cmp(b).expect("non-finite bootstrap value"));
    let rank = q * (sorted.len() - 1) as f64;
    let lo = rank as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let frac = rank - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

/// Outcome count grid for one key, plus the predicted ridge overlay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Heatmap {
    pub key: u32,
    pub n: usize,
    /// Row-major counts indexed `[v][u]`, `2^n` rows of `2^n`.
    pub counts: Vec<u64>,
    /// The predicted ridge `{(u, k*u mod 2^n)}`.
    pub overlay: Vec<(u32, u32)>,
}

impl Heatmap {
    pub fn count(&self, v: u32, u: u32) -> u64 {
        self.counts[(v as usize) << self.n | u as usize]
    }
}

/// Count grid of `(u, v)` outcomes for one key group.
pub fn heatmap(ds: &Dataset, key: u32) -> Result<Heatmap, CoreError> {
    let ki = ds
        .spec()
        .key_index(key)
        .ok_or(CoreError::UnknownKey { key })?;
    let n = ds.spec().n;
    let modulus = ds.spec().modulus();
    let mut counts = vec![0u64; ds.spec().outcome_count()];
    for &pattern in ds.group(ki) {
        // pattern integer is u + 2^n v, which is already [v][u] row-major
        counts[pattern as usize] += 1;
    }
    let overlay = (0..modulus)
        .map(|u| (u, (u64::from(key) * u64::from(u) % u64::from(modulus)) as u32))
        .collect();
    Ok(Heatmap {
        key,
        n,
        counts,
        overlay,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::ExperimentSpec;
    use crate::sim::{sample_dataset, NoiseModel};

    #[test]
    fn wilson_matches_published_interval() {
        // 1499/8192 ~ 0.1830 -> [0.1748, 0.1915]
        let (lo, hi) = wilson_interval(1499, 8192, DEFAULT_Z95).unwrap();
        assert!((lo - 0.1748).abs() < 5e-4, "lo = {lo}");
        assert!((hi - 0.1915).abs() < 5e-4, "hi = {hi}");
    }

    #[test]
    fn wilson_boundary_cases() {
        let (lo, _) = wilson_interval(0, 10, DEFAULT_Z95).unwrap();
        assert_eq!(lo, 0.0);
        let (_, hi) = wilson_interval(10, 10, DEFAULT_Z95).unwrap();
        assert_eq!(hi, 1.0);
        assert!(wilson_interval(1, 0, DEFAULT_Z95).is_err());
        assert!(wilson_interval(3, 2, DEFAULT_Z95).is_err());
    }

    #[test]
    fn wilson_contains_estimate_and_tightens_with_trials() {
        let mut prev_width = f64::MAX;
        for &trials in &[10u64, 100, 1000, 10_000] {
            let successes = trials / 5;
            let p = successes as f64 / trials as f64;
            let (lo, hi) = wilson_interval(successes, trials, DEFAULT_Z95).unwrap();
            assert!(lo <= p && p <= hi);
            let width = hi - lo;
            assert!(width < prev_width);
            prev_width = width;
        }
    }

    #[test]
    fn noiseless_data_has_full_contrast() {
        let spec = ExperimentSpec::default();
        let ds = sample_dataset(&spec, &NoiseModel::new(1.0, 0.0), 11).unwrap();
        let stats = ridge_hit_probability(&ds).unwrap();
        assert_eq!(stats.p_hit, 1.0);
        assert_eq!(stats.contrast, 16.0);
        for pk in &stats.per_key {
            assert_eq!(pk.hits, pk.count);
        }
        // zero-variance bootstrap collapses to a point
        let (lo, hi) = bootstrap_contrast_ci(&ds, 200, 3).unwrap();
        assert_eq!((lo, hi), (16.0, 16.0));
    }

    #[test]
    fn uniform_data_sits_at_baseline() {
        let spec = ExperimentSpec::default();
        let ds = sample_dataset(&spec, &NoiseModel::new(0.0, 0.0), 17).unwrap();
        let stats = ridge_hit_probability(&ds).unwrap();
        assert!((stats.p_hit - 0.0625).abs() < 0.008); // 3 sigma binomial at N = 8192
        assert!((stats.contrast - stats.p_hit * 16.0).abs() < 1e-12);
    }

    #[test]
    fn contrast_identity_per_key_and_pooled() {
        let spec = ExperimentSpec::default();
        let ds = sample_dataset(&spec, &NoiseModel::new(0.4, 0.05), 23).unwrap();
        let stats = ridge_hit_probability(&ds).unwrap();
        assert_eq!(stats.contrast, stats.p_hit / 0.0625);
        let pooled: u64 = stats.per_key.iter().map(|k| k.hits).sum();
        assert_eq!(pooled, stats.pooled_hits);
    }

    #[test]
    fn bootstrap_interval_contains_point_estimate() {
        let spec = ExperimentSpec::default();
        let ds = sample_dataset(&spec, &NoiseModel::new(0.13, 0.0), 29).unwrap();
        let stats = ridge_stats(&ds, 2000, 5).unwrap();
        assert!(stats.contrast_ci.0 <= stats.contrast && stats.contrast <= stats.contrast_ci.1);
    }

    #[test]
    fn bootstrap_width_matches_binomial_scale() {
        // calibrated to p_hit 0.1830 at N = 8192: contrast sigma ~ 0.068,
        // so the 95% percentile interval width lands in [0.2, 0.4]
        let spec = ExperimentSpec::default();
        let lambda = crate::sim::calibrate_lambda(&spec, 0.0, &[], 0.1830).unwrap();
        let ds = sample_dataset(&spec, &NoiseModel::new(lambda, 0.0), 41).unwrap();
        let (lo, hi) = bootstrap_contrast_ci(&ds, 2000, 6).unwrap();
        let width = hi - lo;
        assert!((0.2..=0.4).contains(&width), "width = {width}");
    }

    #[test]
    fn bootstrap_is_deterministic_and_validates() {
        let spec = ExperimentSpec::default();
        let ds = sample_dataset(&spec, &NoiseModel::new(0.2, 0.0), 1).unwrap();
        assert_eq!(
            bootstrap_contrast_ci(&ds, 150, 9).unwrap(),
            bootstrap_contrast_ci(&ds, 150, 9).unwrap()
        );
        assert!(bootstrap_contrast_ci(&ds, 99, 9).is_err());
    }

    #[test]
    fn heatmap_counts_and_overlay() {
        let spec = ExperimentSpec::default();
        let ds = sample_dataset(&spec, &NoiseModel::new(1.0, 0.0), 2).unwrap();
        let map = heatmap(&ds, 1).unwrap();
        // noiseless key 1: mass only on the diagonal v = u
        for v in 0..16u32 {
            for u in 0..16u32 {
                if u != v {
                    assert_eq!(map.count(v, u), 0);
                }
            }
        }
        let total: u64 = map.counts.iter().sum();
        assert_eq!(total, 1024);

        // even-key coset: overlay of k = 8 only reaches v in {0, 8}
        let map8 = heatmap(&ds, 8).unwrap();
        assert!(map8.overlay.iter().all(|&(_, v)| v == 0 || v == 8));
        assert!(heatmap(&ds, 9).is_err());
    }
}
