//! Uniformity sanity checks and the representation ablation with
//! calibration scoring.
//!
//! The uniformity report guards against trivial explanations: per-bit
//! marginals should sit near 0.5 while real structure shows up in specific
//! covariance pairs. The ablation restricts what each classifier may see:
//!
//! - `MarginalsOnly`: per-class independent-bit likelihood, add-one smoothed;
//! - `Pairwise`: multiclass maximum-entropy model on bit and bit-pair
//!   product features (plus intercept), trained by deterministic full-batch
//!   gradient descent;
//! - `FullBitstring`: per-class categorical over all outcomes, add-one
//!   smoothed.
//!
//! Test-set quality is scored by accuracy and expected calibration error
//! over equal-width top-confidence bins.

use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::CoreError;
use crate::rng::Stream;

/// Register membership of a bit pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegisterTag {
    WithinA,
    WithinB,
    Cross,
}

/// Covariance of one bit pair (1-based positions, `i < j`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairCovariance {
    pub i: usize,
    pub j: usize,
    pub cov: f64,
    pub tag: RegisterTag,
}

/// Pooled per-bit marginals and all pairwise covariances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniformityReport {
    /// `P(D_i = 1)` pooled over all keys, indexed by bit position - 1.
    pub one_probs: Vec<f64>,
    pub max_marginal_deviation: f64,
    /// All `C(2n, 2)` pairs, largest `|cov|` first.
    pub covariances: Vec<PairCovariance>,
}

/// Pooled covariance of bits `i` and `j` (1-based; `i == j` gives the variance).
pub fn bit_covariance(ds: &Dataset, i: usize, j: usize) -> f64 {
    let total = ds.total_shots() as f64;
    let (mut pi, mut pj, mut pij) = (0.0, 0.0, 0.0);
    for shot in ds.shots() {
        let bi = f64::from(shot.bit(i));
        let bj = f64::from(shot.bit(j));
        pi += bi;
        pj += bj;
        pij += bi * bj;
    }
    pij / total - (pi / total) * (pj / total)
}

/// Pooled marginal and covariance diagnostics.
pub fn uniformity(ds: &Dataset) -> Result<UniformityReport, CoreError> {
    if ds.total_shots() == 0 {
        return Err(CoreError::EmptyDataset);
    }
    let bit_count = ds.spec().bit_count();
    let n = ds.spec().n;
    let total = ds.total_shots() as f64;

    let mut ones = vec![0.0f64; bit_count];
    let mut pair = vec![0.0f64; bit_count * bit_count];
    for shot in ds.shots() {
        let p = shot.pattern;
        for i in 0..bit_count {
            if p >> i & 1 == 1 {
                ones[i] += 1.0;
                for j in (i + 1)..bit_count {
                    if p >> j & 1 == 1 {
                        pair[i * bit_count + j] += 1.0;
                    }
                }
            }
        }
    }
    let one_probs: Vec<f64> = ones.iter().map(|&c| c / total).collect();
    let max_marginal_deviation = one_probs
        .iter()
        .map(|p| (p - 0.5).abs())
        .fold(0.0, f64::max);

    let mut covariances = Vec::with_capacity(bit_count * (bit_count - 1) / 2);
    for i in 0..bit_count {
        for j in (i + 1)..bit_count {
            let cov = pair[i * bit_count + j] / total - one_probs[i] * one_probs[j];
            let tag = if j < n {
                RegisterTag::WithinA
            } else if i >= n {
                RegisterTag::WithinB
            } else {
                RegisterTag::Cross
            };
            covariances.push(PairCovariance {
                i: i + 1,
                j: j + 1,
                cov,
                tag,
            });
        }
    }
    covariances.sort_by(|a, b| {
        b.cov
            .abs()
            .partial_cmp(&a.cov.abs())
            .expect("finite covariances")
            .then(a.i.cmp(&b.i))
            .then(a.j.cmp(&b.j))
    });
    Ok(UniformityReport {
        one_probs,
        max_marginal_deviation,
        covariances,
    })
}

/// Seeded stratified split: each key group is shuffled with its own child
/// stream, then cut in half (odd shot goes to the test side).
pub fn stratified_split(ds: &Dataset, seed: u64) -> (Dataset, Dataset) {
    let spec = ds.spec().clone();
    let mut train_groups = Vec::with_capacity(spec.keys.len());
    let mut test_groups = Vec::with_capacity(spec.keys.len());
    for ki in 0..spec.keys.len() {
        let mut patterns = ds.group(ki).to_vec();
        Stream::derived(seed, ki as u64).shuffle(&mut patterns);
        let cut = patterns.len() / 2;
        let test = patterns.split_off(cut);
        train_groups.push(patterns);
        test_groups.push(test);
    }
    let train = Dataset::from_groups(spec.clone(), train_groups).expect("split keeps groups valid");
    let test = Dataset::from_groups(spec, test_groups).expect("split keeps groups valid");
    (train, test)
}

/// Which representation of a shot the classifier may use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AblationVariant {
    MarginalsOnly,
    Pairwise,
    FullBitstring,
}

/// Maximum-entropy training schedule for the pairwise variant.
pub const PAIRWISE_LEARNING_RATE: f64 = 0.1;
pub const PAIRWISE_L2: f64 = 1e-3;
pub const PAIRWISE_ITERATIONS: usize = 500;

enum ModelKind {
    Marginals {
        log_prior: Vec<f64>,
        /// `log P(D_i = 1 | class)` and its complement, `[class][bit]`.
        log_one: Vec<Vec<f64>>,
        log_zero: Vec<Vec<f64>>,
    },
    Pairwise {
        /// Row-major `[class][feature]`.
        weights: Vec<f64>,
        feature_count: usize,
    },
    Full {
        log_prior: Vec<f64>,
        /// `log P(pattern | class)`, `[class][pattern]`.
        log_outcome: Vec<Vec<f64>>,
    },
}

/// A trained ablation classifier over the spec's key classes.
pub struct AblationModel {
    variant: AblationVariant,
    classes: Vec<u32>,
    bit_count: usize,
    kind: ModelKind,
}

impl AblationModel {
    pub fn variant(&self) -> AblationVariant {
        self.variant
    }

    pub fn classes(&self) -> &[u32] {
        &self.classes
    }

    /// Flat parameter vector; bit-identical across retrainings on the same data.
    pub fn parameters(&self) -> Vec<f64> {
        match &self.kind {
            ModelKind::Marginals {
                log_prior,
                log_one,
                log_zero,
            } => {
                let mut out = log_prior.clone();
                out.extend(log_one.iter().flatten());
                out.extend(log_zero.iter().flatten());
                out
            }
            ModelKind::Pairwise { weights, .. } => weights.clone(),
            ModelKind::Full {
                log_prior,
                log_outcome,
            } => {
                let mut out = log_prior.clone();
                out.extend(log_outcome.iter().flatten());
                out
            }
        }
    }

    /// Per-class probability vector for one shot pattern.
    ///
    /// Always strictly positive and normalized to 1 (smoothing plus softmax).
    pub fn predict(&self, pattern: u16) -> Vec<f64> {
        let scores: Vec<f64> = match &self.kind {
            ModelKind::Marginals {
                log_prior,
                log_one,
                log_zero,
            } => (0..self.classes.len())
                .map(|c| {
                    let mut s = log_prior[c];
                    for i in 0..self.bit_count {
                        s += if pattern >> i & 1 == 1 {
                            log_one[c][i]
                        } else {
                            log_zero[c][i]
                        };
                    }
                    s
                })
                .collect(),
            ModelKind::Pairwise {
                weights,
                feature_count,
            } => {
                let x = pairwise_features(pattern, self.bit_count);
                (0..self.classes.len())
                    .map(|c| {
                        let row = &weights[c * feature_count..(c + 1) * feature_count];
                        row.iter().zip(&x).map(|(w, f)| w * f).sum()
                    })
                    .collect()
            }
            ModelKind::Full {
                log_prior,
                log_outcome,
            } => (0..self.classes.len())
                .map(|c| log_prior[c] + log_outcome[c][pattern as usize])
                .collect(),
        };
        softmax(&scores)
    }
}

fn softmax(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|&s| libm::exp(s - max)).collect();
    let sum: f64 = exps.iter().sum();
    exps.iter().map(|&e| e / sum).collect()
}

/// Feature vector of the pairwise variant: intercept, bits, bit-pair products.
pub fn pairwise_features(pattern: u16, bit_count: usize) -> Vec<f64> {
    let mut x = Vec::with_capacity(1 + bit_count + bit_count * (bit_count - 1) / 2);
    x.push(1.0);
    for i in 0..bit_count {
        x.push(f64::from(pattern >> i & 1));
    }
    for i in 0..bit_count {
        for j in (i + 1)..bit_count {
            x.push(f64::from((pattern >> i & 1) & (pattern >> j & 1)));
        }
    }
    x
}

/// Mean cross-entropy with L2 penalty, and its gradient, for the maxent model.
///
/// `rows` are feature vectors, `labels` class indices, `weights` row-major
/// `[class][feature]`.
pub fn maxent_loss_grad(
    rows: &[Vec<f64>],
    labels: &[usize],
    class_count: usize,
    weights: &[f64],
    l2: f64,
) -> (f64, Vec<f64>) {
    let n = rows.len() as f64;
    let feature_count = rows[0].len();
    let mut loss = 0.0;
    let mut grad = vec![0.0; weights.len()];
    for (x, &label) in rows.iter().zip(labels) {
        let scores: Vec<f64> = (0..class_count)
            .map(|c| {
                let row = &weights[c * feature_count..(c + 1) * feature_count];
                row.iter().zip(x).map(|(w, f)| w * f).sum()
            })
            .collect();
        let probs = softmax(&scores);
        loss -= libm::log(probs[label]);
        for c in 0..class_count {
            let delta = probs[c] - if c == label { 1.0 } else { 0.0 };
            let g = &mut grad[c * feature_count..(c + 1) * feature_count];
            for (gf, &xf) in g.iter_mut().zip(x) {
                *gf += delta * xf;
            }
        }
    }
    loss /= n;
    for (g, &w) in grad.iter_mut().zip(weights) {
        *g = *g / n + l2 * w;
    }
    loss += 0.5 * l2 * weights.iter().map(|w| w * w).sum::<f64>();
    (loss, grad)
}

/// Train one ablation variant on a training split.
pub fn train_ablation_model(
    train: &Dataset,
    variant: AblationVariant,
) -> Result<AblationModel, CoreError> {
    let spec = train.spec();
    let classes = spec.keys.clone();
    if classes.len() < 2 {
        return Err(CoreError::InvalidParam(
            "ablation training needs at least 2 key classes".into(),
        ));
    }
    let bit_count = spec.bit_count();
    let class_count = classes.len();
    let total = train.total_shots() as f64;
    let log_prior: Vec<f64> = (0..class_count)
        .map(|ki| {
            libm::log((train.group(ki).len() as f64 + 1.0) / (total + class_count as f64))
        })
        .collect();

    let kind = match variant {
        AblationVariant::MarginalsOnly => {
            let mut log_one = Vec::with_capacity(class_count);
            let mut log_zero = Vec::with_capacity(class_count);
            for ki in 0..class_count {
                let group = train.group(ki);
                let denom = group.len() as f64 + 2.0;
                let (mut lo, mut lz) = (Vec::with_capacity(bit_count), Vec::with_capacity(bit_count));
                for i in 0..bit_count {
                    let ones = group.iter().filter(|&&p| p >> i & 1 == 1).count() as f64;
                    lo.push(libm::log((ones + 1.0) / denom));
                    lz.push(libm::log((group.len() as f64 - ones + 1.0) / denom));
                }
                log_one.push(lo);
                log_zero.push(lz);
            }
            ModelKind::Marginals {
                log_prior,
                log_one,
                log_zero,
            }
        }
        AblationVariant::Pairwise => {
            let (patterns, labels) = train.flattened();
            let rows: Vec<Vec<f64>> = patterns
                .iter()
                .map(|&p| pairwise_features(p, bit_count))
                .collect();
            let feature_count = rows[0].len();
            let mut weights = vec![0.0; class_count * feature_count];
            for _ in 0..PAIRWISE_ITERATIONS {
                let (_, grad) = maxent_loss_grad(&rows, &labels, class_count, &weights, PAIRWISE_L2);
                for (w, g) in weights.iter_mut().zip(&grad) {
                    *w -= PAIRWISE_LEARNING_RATE * g;
                }
            }
            ModelKind::Pairwise {
                weights,
                feature_count,
            }
        }
        AblationVariant::FullBitstring => {
            let outcomes = spec.outcome_count();
            let log_outcome = (0..class_count)
                .map(|ki| {
                    let group = train.group(ki);
                    let denom = group.len() as f64 + outcomes as f64;
                    let mut counts = vec![0u64; outcomes];
                    for &p in group {
                        counts[p as usize] += 1;
                    }
                    counts
                        .iter()
                        .map(|&c| libm::log((c as f64 + 1.0) / denom))
                        .collect()
                })
                .collect();
            ModelKind::Full {
                log_prior,
                log_outcome,
            }
        }
    };
    Ok(AblationModel {
        variant,
        classes,
        bit_count,
        kind,
    })
}

/// One reliability-diagram bin (equal-width over top-label confidence).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationBin {
    pub center: f64,
    pub count: usize,
    pub accuracy: f64,
    pub confidence: f64,
}

/// Bin predictions by top-label confidence.
///
/// `predictions` pairs each per-class probability vector with the true class
/// index. Empty bins stay in the output with zeroed statistics.
pub fn calibration_bins(
    predictions: &[(Vec<f64>, usize)],
    bins: usize,
) -> Result<Vec<CalibrationBin>, CoreError> {
    if bins == 0 {
        return Err(CoreError::InvalidParam("need at least 1 calibration bin".into()));
    }
    if predictions.is_empty() {
        return Err(CoreError::InvalidParam("no predictions to calibrate".into()));
    }
    let mut count = vec![0usize; bins];
    let mut hits = vec![0usize; bins];
    let mut conf_sum = vec![0.0f64; bins];
    for (probs, truth) in predictions {
        let (argmax, conf) = probs
            .iter()
            .enumerate()
            .fold((0usize, f64::NEG_INFINITY), |(bi, bc), (i, &p)| {
                if p > bc {
                    (i, p)
                } else {
                    (bi, bc)
                }
            });
        let b = ((conf * bins as f64) as usize).min(bins - 1);
        count[b] += 1;
        conf_sum[b] += conf;
        if argmax == *truth {
            hits[b] += 1;
        }
    }
    Ok((0..bins)
        .map(|b| CalibrationBin {
            center: (b as f64 + 0.5) / bins as f64,
            count: count[b],
            accuracy: if count[b] > 0 {
                hits[b] as f64 / count[b] as f64
            } else {
                0.0
            },
            confidence: if count[b] > 0 {
                conf_sum[b] / count[b] as f64
            } else {
                0.0
            },
        })
        .collect())
}

/// Expected calibration error: bin-weighted `|accuracy - confidence|`.
pub fn ece(predictions: &[(Vec<f64>, usize)], bins: usize) -> Result<f64, CoreError> {
    let table = calibration_bins(predictions, bins)?;
    let total = predictions.len() as f64;
    Ok(table
        .iter()
        .map(|b| (b.count as f64 / total) * (b.accuracy - b.confidence).abs())
        .sum())
}

/// Test-set metrics of one trained variant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationOutcome {
    pub variant: AblationVariant,
    pub test_accuracy: f64,
    pub test_ece: f64,
    pub bins: Vec<CalibrationBin>,
}

/// Full ablation table over all three variants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub train_size: usize,
    pub test_size: usize,
    pub outcomes: Vec<AblationOutcome>,
}

/// Evaluate one trained model on a test split.
pub fn evaluate_model(
    model: &AblationModel,
    test: &Dataset,
    bins: usize,
) -> Result<AblationOutcome, CoreError> {
    let spec = test.spec();
    let predictions: Vec<(Vec<f64>, usize)> = test
        .shots()
        .map(|shot| {
            let truth = spec.key_index(shot.key).expect("shot keys come from spec");
            (model.predict(shot.pattern), truth)
        })
        .collect();
    let correct = predictions
        .iter()
        .filter(|(probs, truth)| {
            let argmax = probs
                .iter()
                .enumerate()
                .fold((0usize, f64::NEG_INFINITY), |(bi, bc), (i, &p)| {
                    if p > bc {
                        (i, p)
                    } else {
                        (bi, bc)
                    }
                })
                .0;
            argmax == *truth
        })
        .count();
    Ok(AblationOutcome {
        variant: model.variant(),
        test_accuracy: correct as f64 / predictions.len() as f64,
        test_ece: ece(&predictions, bins)?,
        bins: calibration_bins(&predictions, bins)?,
    })
}

/// Split, train all variants, and evaluate on the held-out half.
pub fn run_ablation(ds: &Dataset, seed: u64, bins: usize) -> Result<AblationReport, CoreError> {
    let (train, test) = stratified_split(ds, seed);
    let mut outcomes = Vec::with_capacity(3);
    for variant in [
        AblationVariant::MarginalsOnly,
        AblationVariant::Pairwise,
        AblationVariant::FullBitstring,
    ] {
        let model = train_ablation_model(&train, variant)?;
        outcomes.push(evaluate_model(&model, &test, bins)?);
    }
    Ok(AblationReport {
        train_size: train.total_shots(),
        test_size: test.total_shots(),
        outcomes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Dataset, ExperimentSpec, Shot};
    use crate::sim::{sample_dataset, NoiseModel};

    #[test]
    fn uniform_noise_has_flat_marginals() {
        let spec = ExperimentSpec::default();
        let ds = sample_dataset(&spec, &NoiseModel::new(0.0, 0.0), 19).unwrap();
        let report = uniformity(&ds).unwrap();
        assert!(report.max_marginal_deviation <= 0.02, "dev = {}", report.max_marginal_deviation);
        assert_eq!(report.covariances.len(), 28);
    }

    #[test]
    fn perfectly_correlated_pair_shows_bernoulli_variance() {
        // D5 = D6 on every shot; half the shots set them
        let spec = ExperimentSpec::default();
        let groups: Vec<Vec<u16>> = (0..8)
            .map(|_| {
                (0..64u16)
                    .map(|i| if i % 2 == 0 { 0b0011_0000 } else { 0 })
                    .collect()
            })
            .collect();
        let ds = Dataset::from_groups(spec, groups).unwrap();
        let report = uniformity(&ds).unwrap();
        let top = &report.covariances[0];
        assert_eq!((top.i, top.j), (5, 6));
        assert_eq!(top.tag, RegisterTag::WithinB);
        assert!((top.cov - 0.25).abs() < 1e-12); // p (1 - p) at p = 1/2
    }

    #[test]
    fn covariance_is_symmetric_with_bernoulli_diagonal() {
        let spec = ExperimentSpec::default();
        let ds = sample_dataset(&spec, &NoiseModel::new(0.5, 0.05), 23).unwrap();
        assert!((bit_covariance(&ds, 2, 7) - bit_covariance(&ds, 7, 2)).abs() < 1e-15);
        let report = uniformity(&ds).unwrap();
        for i in 1..=8 {
            let p = report.one_probs[i - 1];
            assert!((bit_covariance(&ds, i, i) - p * (1.0 - p)).abs() < 1e-12);
        }
    }

    #[test]
    fn register_tags_partition_all_pairs() {
        let spec = ExperimentSpec::default();
        let ds = sample_dataset(&spec, &NoiseModel::new(0.2, 0.1), 3).unwrap();
        let report = uniformity(&ds).unwrap();
        let count = |tag: RegisterTag| report.covariances.iter().filter(|c| c.tag == tag).count();
        assert_eq!(count(RegisterTag::WithinA), 6);
        assert_eq!(count(RegisterTag::WithinB), 6);
        assert_eq!(count(RegisterTag::Cross), 16);
    }

    #[test]
    fn split_halves_every_group() {
        let spec = ExperimentSpec::default();
        let ds = sample_dataset(&spec, &NoiseModel::new(0.3, 0.0), 4).unwrap();
        let (train, test) = stratified_split(&ds, 5);
        assert_eq!(train.group_sizes(), vec![512; 8]);
        assert_eq!(test.group_sizes(), vec![512; 8]);
        // identical seed, identical split
        let (train2, _) = stratified_split(&ds, 5);
        assert_eq!(train, train2);
    }

    #[test]
    fn odd_group_gives_extra_shot_to_test() {
        let spec = ExperimentSpec::new(2, vec![0, 1], 3).unwrap();
        let ds = Dataset::from_groups(spec, vec![vec![1, 2, 3], vec![4, 5, 6]]).unwrap();
        let (train, test) = stratified_split(&ds, 1);
        assert_eq!(train.group_sizes(), vec![1, 1]);
        assert_eq!(test.group_sizes(), vec![2, 2]);
    }

    /// Four keys written directly into bits 1-2; bits 3-4 are noise.
    fn separable_dataset(per_key: usize, seed: u64) -> Dataset {
        let spec = ExperimentSpec::new(2, vec![0, 1, 2, 3], per_key).unwrap();
        let mut stream = Stream::new(seed);
        let shots: Vec<Shot> = (0..4u32)
            .flat_map(|key| {
                (0..per_key)
                    .map(|_| Shot {
                        key,
                        pattern: (key as u16) | ((stream.next_u64() & 3) as u16) << 2,
                    })
                    .collect::<Vec<_>>()
            })
            .collect();
        Dataset::from_shots(spec, &shots).unwrap()
    }

    #[test]
    fn pairwise_model_solves_separable_classes() {
        let ds = separable_dataset(200, 31);
        let (train, test) = stratified_split(&ds, 2);
        let model = train_ablation_model(&train, AblationVariant::Pairwise).unwrap();
        let outcome = evaluate_model(&model, &test, 10).unwrap();
        assert_eq!(outcome.test_accuracy, 1.0);
    }

    #[test]
    fn all_models_sit_at_chance_on_uniform_noise() {
        let spec = ExperimentSpec::default();
        let ds = sample_dataset(&spec, &NoiseModel::new(0.0, 0.0), 91).unwrap();
        let report = run_ablation(&ds, 17, 10).unwrap();
        let sigma = (0.125 * 0.875 / 4096.0f64).sqrt();
        for outcome in &report.outcomes {
            assert!(
                (outcome.test_accuracy - 0.125).abs() < 3.0 * sigma,
                "{:?} accuracy {}",
                outcome.variant,
                outcome.test_accuracy
            );
        }
    }

    #[test]
    fn maxent_gradient_matches_finite_differences() {
        let ds = separable_dataset(8, 77);
        let (patterns, labels) = ds.flattened();
        let rows: Vec<Vec<f64>> = patterns.iter().map(|&p| pairwise_features(p, 4)).collect();
        let feature_count = rows[0].len();
        let class_count = 4;
        let mut stream = Stream::new(123);
        let weights: Vec<f64> = (0..class_count * feature_count)
            .map(|_| stream.next_f64() - 0.5)
            .collect();
        let (_, grad) = maxent_loss_grad(&rows, &labels, class_count, &weights, PAIRWISE_L2);
        let h = 1e-5;
        for probe in 0..weights.len() {
            let mut plus = weights.clone();
            plus[probe] += h;
            let mut minus = weights.clone();
            minus[probe] -= h;
            let (lp, _) = maxent_loss_grad(&rows, &labels, class_count, &plus, PAIRWISE_L2);
            let (lm, _) = maxent_loss_grad(&rows, &labels, class_count, &minus, PAIRWISE_L2);
            let numeric = (lp - lm) / (2.0 * h);
            let denom = grad[probe].abs().max(numeric.abs()).max(1e-8);
            assert!(
                (grad[probe] - numeric).abs() / denom < 1e-4,
                "coordinate {probe}: analytic {} vs numeric {numeric}",
                grad[probe]
            );
        }
    }

    #[test]
    fn training_is_bit_identical() {
        let ds = separable_dataset(64, 10);
        for variant in [
            AblationVariant::MarginalsOnly,
            AblationVariant::Pairwise,
            AblationVariant::FullBitstring,
        ] {
            let a = train_ablation_model(&ds, variant).unwrap().parameters();
            let b = train_ablation_model(&ds, variant).unwrap().parameters();
            let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
            assert_eq!(bits(&a), bits(&b), "{variant:?}");
        }
    }

    #[test]
    fn predictions_are_positive_and_normalized() {
        let spec = ExperimentSpec::default();
        let ds = sample_dataset(&spec, &NoiseModel::new(0.4, 0.1), 6).unwrap();
        for variant in [
            AblationVariant::MarginalsOnly,
            AblationVariant::Pairwise,
            AblationVariant::FullBitstring,
        ] {
            let model = train_ablation_model(&ds, variant).unwrap();
            for pattern in [0u16, 17, 200, 255] {
                let probs = model.predict(pattern);
                assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-9);
                assert!(probs.iter().all(|&p| p > 0.0));
            }
        }
    }

    #[test]
    fn single_class_training_is_rejected() {
        let spec = ExperimentSpec::new(4, vec![3], 8).unwrap();
        let ds = Dataset::from_groups(spec, vec![vec![0; 8]]).unwrap();
        assert!(train_ablation_model(&ds, AblationVariant::MarginalsOnly).is_err());
    }

    #[test]
    fn ece_trivial_cases() {
        // confidence 1.0 and always right
        let right: Vec<(Vec<f64>, usize)> =
            (0..100).map(|_| (vec![1.0, 0.0], 0)).collect();
        assert_eq!(ece(&right, 10).unwrap(), 0.0);
        // confidence 1.0 but right half the time
        let half: Vec<(Vec<f64>, usize)> = (0..100)
            .map(|i| (vec![1.0, 0.0], usize::from(i % 2 == 1)))
            .collect();
        assert!((ece(&half, 10).unwrap() - 0.5).abs() < 1e-12);
        assert!(ece(&right, 0).is_err());
        assert!(ece(&[], 10).is_err());
    }

    #[test]
    fn calibrated_predictor_has_small_ece() {
        // confidence drawn uniformly, correctness Bernoulli(confidence)
        let mut stream = Stream::new(2718);
        let preds: Vec<(Vec<f64>, usize)> = (0..100_000)
            .map(|_| {
                let conf = 0.5 + 0.5 * stream.next_f64();
                let correct = stream.next_f64() < conf;
                (vec![conf, 1.0 - conf], usize::from(!correct))
            })
            .collect();
        let e = ece(&preds, 10).unwrap();
        assert!(e < 0.02, "ece = {e}");
    }
}
