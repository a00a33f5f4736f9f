//! Label-shuffle permutation tests and the bootstrap reliability sweep.
//!
//! The permutation null shuffles key labels globally across all shots,
//! destroying the label-bits association while preserving both marginals.
//! The ridge classifier is label-free, so per-shot predictions are computed
//! once and only re-scored against shuffled labels; the synergy statistic is
//! recomputed from scratch per permutation so the null estimator is
//! identical to the observed one. P-values use the add-one rule
//! `(1 + #{null >= observed}) / (1 + n_perm)`.
//!
//! Replicate `j` of either procedure consumes only a stream derived from
//! `(seed, j)`, so results are independent of evaluation order and thread
//! count.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::CoreError;
use crate::keyrec;
use crate::lattice::{compute_g, mobius_invert, positive_mass, KeyedJoint};
use crate::rng::{derive_seed, Stream};

/// Statistic tested against the label-shuffle null.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PermutationStatistic {
    /// Per-shot ridge-classifier accuracy.
    Accuracy,
    /// Top-order positive Möbius mass (order `k_max` synergy).
    Synergy,
}

/// Observed statistic, its permutation null, and the add-one p-value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PermutationResult {
    pub statistic: PermutationStatistic,
    pub observed: f64,
    pub n_perm: usize,
    pub p_value: f64,
    pub null_values: Vec<f64>,
}

/// Add-one permutation p-value; always in `(0, 1]`.
pub fn permutation_p_value(observed: f64, null_values: &[f64]) -> f64 {
    let exceed = null_values.iter().filter(|&&x| x >= observed).count();
    (1 + exceed) as f64 / (1 + null_values.len()) as f64
}

/// Precomputed inputs for one permutation test; replicates evaluate
/// independently via [`PermutationPlan::null_value`].
pub struct PermutationPlan {
    statistic: PermutationStatistic,
    k_max: usize,
    bit_count: usize,
    key_count: usize,
    patterns: Vec<u16>,
    labels: Vec<usize>,
    predictions: Vec<usize>,
    perm_seed: u64,
}

impl PermutationPlan {
    pub fn new(
        ds: &Dataset,
        statistic: PermutationStatistic,
        k_max: usize,
        seed: u64,
    ) -> Result<Self, CoreError> {
        if ds.total_shots() == 0 {
            return Err(CoreError::EmptyDataset);
        }
        let (patterns, labels) = ds.flattened();
        let predictions = match statistic {
            PermutationStatistic::Accuracy => {
                let spec = ds.spec();
                keyrec::predictions(ds, derive_seed(seed, 0))
                    .into_iter()
                    .map(|key| spec.key_index(key).expect("classifier returns spec keys"))
                    .collect()
            }
            PermutationStatistic::Synergy => Vec::new(),
        };
        Ok(Self {
            statistic,
            k_max,
            bit_count: ds.spec().bit_count(),
            key_count: ds.spec().keys.len(),
            patterns,
            labels,
            predictions,
            perm_seed: derive_seed(seed, 1),
        })
    }

    pub fn observed(&self) -> Result<f64, CoreError> {
        self.statistic_for(&self.labels)
    }

    /// Null statistic of permutation `j`.
    pub fn null_value(&self, j: usize) -> Result<f64, CoreError> {
        let mut shuffled = self.labels.clone();
        Stream::derived(self.perm_seed, j as u64).shuffle(&mut shuffled);
        self.statistic_for(&shuffled)
    }

    fn statistic_for(&self, labels: &[usize]) -> Result<f64, CoreError> {
        match self.statistic {
            PermutationStatistic::Accuracy => {
                let correct = self
                    .predictions
                    .iter()
                    .zip(labels)
                    .filter(|(p, l)| p == l)
                    .count();
                Ok(correct as f64 / labels.len() as f64)
            }
            PermutationStatistic::Synergy => {
                let joint = KeyedJoint::from_labeled_patterns(
                    self.bit_count,
                    self.key_count,
                    &self.patterns,
                    labels,
                );
                crate::lattice::targeted_synergy(&joint, self.k_max)
            }
        }
    }

    pub fn finish(&self, null_values: Vec<f64>) -> Result<PermutationResult, CoreError> {
        let observed = self.observed()?;
        Ok(PermutationResult {
            statistic: self.statistic,
            observed,
            n_perm: null_values.len(),
            p_value: permutation_p_value(observed, &null_values),
            null_values,
        })
    }
}

/// Run a full label-shuffle permutation test serially.
pub fn permutation_test(
    ds: &Dataset,
    statistic: PermutationStatistic,
    n_perm: usize,
    k_max: usize,
    seed: u64,
) -> Result<PermutationResult, CoreError> {
    if n_perm == 0 {
        return Err(CoreError::InvalidParam("permutation test needs n_perm >= 1".into()));
    }
    let plan = PermutationPlan::new(ds, statistic, k_max, seed)?;
    let mut null_values = Vec::with_capacity(n_perm);
    for j in 0..n_perm {
        null_values.push(plan.null_value(j)?);
    }
    plan.finish(null_values)
}

/// Bootstrap spread of one interaction order at a fixed shot budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderReliability {
    pub order: usize,
    pub mean: f64,
    pub sd: f64,
    /// `sd / mean`; absent when the bootstrap mean is not positive.
    pub cv: Option<f64>,
}

/// Reliability of all orders at one shots-per-key budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReliabilityPoint {
    pub shots_per_key: usize,
    pub orders: Vec<OrderReliability>,
    /// Largest order with positive bootstrap mean and `cv <= 1`; 0 if none.
    pub max_reliable_order: usize,
}

/// Replicate-level context for the reliability sweep.
pub struct ReliabilityPlan {
    groups: Vec<Vec<u16>>,
    bit_count: usize,
    k_max: usize,
    seed: u64,
}

impl ReliabilityPlan {
    pub fn new(ds: &Dataset, k_max: usize, seed: u64) -> Result<Self, CoreError> {
        if ds.total_shots() == 0 {
            return Err(CoreError::EmptyDataset);
        }
        let groups = (0..ds.spec().keys.len())
            .map(|ki| ds.group(ki).to_vec())
            .collect();
        Ok(Self {
            groups,
            bit_count: ds.spec().bit_count(),
            k_max,
            seed,
        })
    }

    /// One bootstrap replicate: resample `budget` shots per key with
    /// replacement and return the per-order positive mass (orders 1..=k_max).
    ///
    /// Consumes only the stream derived from `(seed, budget << 32 | replicate)`.
    pub fn replicate(&self, budget: usize, replicate: u64) -> Result<Vec<f64>, CoreError> {
        let mut stream = Stream::derived(self.seed, (budget as u64) << 32 | replicate);
        let size = 1usize << self.bit_count;
        let mut weights = vec![vec![0.0; size]; self.groups.len()];
        for (row, group) in weights.iter_mut().zip(&self.groups) {
            for _ in 0..budget {
                row[group[stream.next_index(group.len())] as usize] += 1.0;
            }
        }
        let joint = KeyedJoint::new(self.bit_count, weights)?;
        let g = compute_g(&joint, self.k_max)?;
        let f = mobius_invert(&g);
        Ok(positive_mass(&f, self.bit_count / 2)
            .iter()
            .map(|m| m.positive_mass)
            .collect())
    }
}

/// Per-order mean/sd/CV across replicates, and the max reliable order.
///
/// `samples[replicate][order - 1]` are the per-replicate positive masses.
pub fn summarize_order_masses(budget: usize, samples: &[Vec<f64>]) -> ReliabilityPoint {
    let replicates = samples.len();
    let order_count = samples.first().map(Vec::len).unwrap_or(0);
    let mut orders = Vec::with_capacity(order_count);
    for k in 0..order_count {
        let values: Vec<f64> = samples.iter().map(|row| row[k]).collect();
        let mean = values.iter().sum::<f64>() / replicates as f64;
        let sd = if replicates > 1 {
            let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
                / (replicates - 1) as f64;
            libm::sqrt(var)
        } else {
            0.0
        };
        orders.push(OrderReliability {
            order: k + 1,
            mean,
            sd,
            cv: if mean > 0.0 { Some(sd / mean) } else { None },
        });
    }
    let max_reliable_order = orders
        .iter()
        .filter(|o| matches!(o.cv, Some(cv) if cv <= 1.0))
        .map(|o| o.order)
        .max()
        .unwrap_or(0);
    ReliabilityPoint {
        shots_per_key: budget,
        orders,
        max_reliable_order,
    }
}

/// Bootstrap reliability sweep over shots-per-key budgets.
pub fn reliability_sweep(
    ds: &Dataset,
    budgets: &[usize],
    replicates: usize,
    k_max: usize,
    seed: u64,
) -> Result<Vec<ReliabilityPoint>, CoreError> {
    if replicates < 50 {
        return Err(CoreError::InvalidParam(format!(
            "reliability sweep needs >= 50 replicates, got {replicates}"
        )));
    }
    let min_group = ds.min_group_size();
    for &budget in budgets {
        if budget == 0 || budget > min_group {
            return Err(CoreError::InvalidParam(format!(
                "budget {budget} exceeds smallest key group ({min_group})"
            )));
        }
    }
    let plan = ReliabilityPlan::new(ds, k_max, seed)?;
    budgets
        .iter()
        .map(|&budget| {
            let samples = (0..replicates)
                .map(|r| plan.replicate(budget, r as u64))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(summarize_order_masses(budget, &samples))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Dataset, ExperimentSpec, Shot};
    use crate::sim::{sample_dataset, NoiseModel};

    #[test]
    fn add_one_rule_reproduces_reference_p_values() {
        let nulls_500 = vec![0.0; 500];
        let p = permutation_p_value(0.5, &nulls_500);
        assert!((p - 0.001996).abs() < 5e-7, "p = {p}");
        let nulls_200 = vec![0.0; 200];
        let p = permutation_p_value(0.5, &nulls_200);
        assert!((p - 0.004975).abs() < 5e-7, "p = {p}");
        // ties count as at least as extreme
        assert_eq!(permutation_p_value(0.5, &[0.5, 0.4]), 2.0 / 3.0);
    }

    #[test]
    fn synergy_permutations_detect_ridge_structure() {
        let spec = ExperimentSpec::default();
        let ds = sample_dataset(&spec, &NoiseModel::new(0.9, 0.0), 33).unwrap();
        let result =
            permutation_test(&ds, PermutationStatistic::Synergy, 60, 3, 12).unwrap();
        assert_eq!(result.p_value, 1.0 / 61.0);
        assert!(result.null_values.iter().all(|&x| x < result.observed));
    }

    #[test]
    fn accuracy_permutations_detect_ridge_structure() {
        let spec = ExperimentSpec::default();
        let ds = sample_dataset(&spec, &NoiseModel::new(0.9, 0.0), 34).unwrap();
        let result =
            permutation_test(&ds, PermutationStatistic::Accuracy, 99, 3, 13).unwrap();
        assert_eq!(result.p_value, 0.01);
        assert!(result.observed > 0.5);
    }

    #[test]
    fn constant_statistic_gives_p_one() {
        // every shot identical: synergy is 0 under any labeling
        let spec = ExperimentSpec::default();
        let groups = vec![vec![0u16; 16]; 8];
        let ds = Dataset::from_groups(spec, groups).unwrap();
        let result = permutation_test(&ds, PermutationStatistic::Synergy, 25, 3, 5).unwrap();
        assert_eq!(result.observed, 0.0);
        assert_eq!(result.p_value, 1.0);
    }

    #[test]
    fn null_data_gives_unremarkable_p_values() {
        let spec = ExperimentSpec::default();
        let ds = sample_dataset(&spec, &NoiseModel::new(0.0, 0.0), 55).unwrap();
        let result =
            permutation_test(&ds, PermutationStatistic::Accuracy, 200, 3, 20).unwrap();
        assert!(result.p_value > 0.01, "p = {}", result.p_value);
    }

    #[test]
    fn permutation_results_are_reproducible() {
        let spec = ExperimentSpec::default();
        let ds = sample_dataset(&spec, &NoiseModel::new(0.3, 0.1), 3).unwrap();
        let a = permutation_test(&ds, PermutationStatistic::Synergy, 30, 3, 7).unwrap();
        let b = permutation_test(&ds, PermutationStatistic::Synergy, 30, 3, 7).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn null_values_are_order_independent() {
        let spec = ExperimentSpec::default();
        let ds = sample_dataset(&spec, &NoiseModel::new(0.4, 0.05), 9).unwrap();
        let plan = PermutationPlan::new(&ds, PermutationStatistic::Synergy, 3, 11).unwrap();
        let forward: Vec<f64> = (0..10).map(|j| plan.null_value(j).unwrap()).collect();
        let backward: Vec<f64> = (0..10).rev().map(|j| plan.null_value(j).unwrap()).collect();
        assert_eq!(forward, backward.into_iter().rev().collect::<Vec<_>>());
    }

    fn parity_dataset(total: usize, seed: u64) -> Dataset {
        let spec = ExperimentSpec::new(2, vec![0, 1], total / 2).unwrap();
        let mut stream = Stream::new(seed);
        let shots: Vec<Shot> = (0..total)
            .map(|_| {
                let pattern = (stream.next_u64() & 15) as u16;
                let parity = (pattern & 1) ^ (pattern >> 1 & 1) ^ (pattern >> 2 & 1);
                Shot {
                    key: u32::from(parity),
                    pattern,
                }
            })
            .collect();
        Dataset::from_shots(spec, &shots).unwrap()
    }

    #[test]
    fn parity_sweep_reaches_order_three() {
        let ds = parity_dataset(8000, 60);
        let points = reliability_sweep(&ds, &[512, 1024], 60, 3, 14).unwrap();
        for point in &points {
            assert_eq!(point.max_reliable_order, 3, "budget {}", point.shots_per_key);
            let order3 = &point.orders[2];
            assert!(order3.cv.unwrap() < 0.2, "cv3 = {:?}", order3.cv);
            assert!((order3.mean - 1.0).abs() < 0.1);
        }
    }

    #[test]
    fn zero_mean_orders_are_never_reliable() {
        let samples = vec![vec![0.0, 0.5], vec![0.0, 0.5], vec![0.0, 0.5]];
        let point = summarize_order_masses(128, &samples);
        assert_eq!(point.orders[0].cv, None);
        assert_eq!(point.orders[1].cv, Some(0.0));
        assert_eq!(point.max_reliable_order, 2);

        let all_zero = vec![vec![0.0], vec![0.0]];
        assert_eq!(summarize_order_masses(128, &all_zero).max_reliable_order, 0);
    }

    #[test]
    fn cv_is_scale_invariant() {
        let base = vec![vec![0.2, 0.8], vec![0.4, 0.6], vec![0.3, 0.9]];
        let scaled: Vec<Vec<f64>> = base
            .iter()
            .map(|row| row.iter().map(|v| v * 37.5).collect())
            .collect();
        let a = summarize_order_masses(64, &base);
        let b = summarize_order_masses(64, &scaled);
        for (x, y) in a.orders.iter().zip(&b.orders) {
            assert!((x.cv.unwrap() - y.cv.unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn sweep_validates_budgets_and_replicates() {
        let ds = parity_dataset(1000, 2);
        assert!(reliability_sweep(&ds, &[100_000], 60, 3, 1).is_err());
        assert!(reliability_sweep(&ds, &[0], 60, 3, 1).is_err());
        assert!(reliability_sweep(&ds, &[64], 10, 3, 1).is_err());
    }

    #[test]
    fn sweep_is_reproducible() {
        let ds = parity_dataset(2000, 8);
        let a = reliability_sweep(&ds, &[128, 256], 50, 3, 77).unwrap();
        let b = reliability_sweep(&ds, &[128, 256], 50, 3, 77).unwrap();
        assert_eq!(a, b);
    }
}
