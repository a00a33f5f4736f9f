//! Synthetic shot generation and its closed-form verification oracle.
//!
//! The noise surrogate is a three-stage channel per key:
//!
//! 1. ridge/uniform mixture: with weight `lambda` draw uniformly from the
//!    key's ridge, otherwise uniformly from all `4^n` outcomes;
//! 2. independent symmetric bit flips with probability `q`;
//! 3. optional per-bit bias `d_i` added to each bit's post-flip
//!    one-probability (requires `|d_i| <= min(q, 1-q)` so the conditional
//!    probabilities stay valid).
//!
//! [`exact_distribution`] composes the stages exactly, giving the per-key
//! joint over all outcomes. Sampling inverts the exact CDF, so empirical
//! estimators can always be checked against the closed form.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, ExperimentSpec};
use crate::error::CoreError;
use crate::ridge::ridge_hit;
use crate::rng::Stream;

/// Ridge-mixture weight, flip probability, and optional per-bit bias.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    /// Probability a shot comes from the ideal ridge rather than uniform noise.
    pub lambda: f64,
    /// Independent per-bit flip probability in `[0, 0.5]`.
    pub q: f64,
    /// Per-bit offsets added to the post-flip one-probability; empty means all zero.
    pub bias: Vec<f64>,
}

impl NoiseModel {
    pub fn new(lambda: f64, q: f64) -> Self {
        Self {
            lambda,
            q,
            bias: Vec::new(),
        }
    }

    pub fn with_bias(mut self, bias: Vec<f64>) -> Self {
        self.bias = bias;
        self
    }

    pub fn validate(&self, spec: &ExperimentSpec) -> Result<(), CoreError> {
        if !(0.0..=1.0).contains(&self.lambda) || !self.lambda.is_finite() {
            return Err(CoreError::InvalidNoise(format!(
                "lambda must be in [0, 1], got {}",
                self.lambda
            )));
        }
        if !(0.0..=0.5).contains(&self.q) || !self.q.is_finite() {
            return Err(CoreError::InvalidNoise(format!(
                "q must be in [0, 0.5], got {}",
                self.q
            )));
        }
        if !self.bias.is_empty() && self.bias.len() != spec.bit_count() {
            return Err(CoreError::InvalidNoise(format!(
                "bias must list {} offsets, got {}",
                spec.bit_count(),
                self.bias.len()
            )));
        }
        for (i, &d) in self.bias.iter().enumerate() {
            let limit = self.q.min(1.0 - self.q);
            if !d.is_finite() || libm::fabs(d) > limit {
                return Err(CoreError::InvalidNoise(format!(
                    "bias[{i}] = {d} exceeds |bias| <= min(q, 1-q) = {limit}"
                )));
            }
        }
        Ok(())
    }

    /// `P(y_i = 1 | x_i)` for bit `i` (0-based).
    fn one_prob(&self, i: usize, x: u8) -> f64 {
        let d = self.bias.get(i).copied().unwrap_or(0.0);
        if x == 0 {
            self.q + d
        } else {
            1.0 - self.q + d
        }
    }
}

/// Exact per-key outcome distribution; the oracle for every estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactJoint {
    spec: ExperimentSpec,
    /// `rows[key_index][pattern]`, each row summing to 1.
    rows: Vec<Vec<f64>>,
}

impl ExactJoint {
    pub fn spec(&self) -> &ExperimentSpec {
        &self.spec
    }

    /// Probability vector over outcome patterns for `key_index`.
    pub fn row(&self, key_index: usize) -> &[f64] {
        &self.rows[key_index]
    }

    /// Ridge-hit probability of each key under its own label.
    pub fn per_key_hit(&self) -> Vec<f64> {
        let n = self.spec.n;
        let m = self.spec.modulus();
        self.spec
            .keys
            .iter()
            .zip(&self.rows)
            .map(|(&k, row)| {
                row.iter()
                    .enumerate()
                    .filter(|(pattern, _)| {
                        let u = *pattern as u32 & (m - 1);
                        let v = *pattern as u32 >> n;
                        ridge_hit(k, u, v, n)
                    })
                    .map(|(_, p)| p)
                    .sum()
            })
            .collect()
    }

    /// Hit probability pooled over keys with equal key weights.
    pub fn pooled_hit(&self) -> f64 {
        let per_key = self.per_key_hit();
        per_key.iter().sum::<f64>() / per_key.len() as f64
    }
}

/// Compose mixture and bit channel in closed form.
pub fn exact_distribution(
    spec: &ExperimentSpec,
    noise: &NoiseModel,
) -> Result<ExactJoint, CoreError> {
    spec.validate()?;
    noise.validate(spec)?;
    let outcomes = spec.outcome_count();
    let n = spec.n;
    let modulus = spec.modulus();
    let uniform = (1.0 - noise.lambda) / outcomes as f64;
    let ridge_mass = noise.lambda / modulus as f64;

    let rows = spec
        .keys
        .iter()
        .map(|&k| {
            let mut p = vec![uniform; outcomes];
            for u in 0..modulus {
                let v = (u64::from(k) * u64::from(u) % u64::from(modulus)) as u32;
                p[(u | (v << n)) as usize] += ridge_mass;
            }
            apply_bit_channel(&mut p, spec.bit_count(), noise);
            p
        })
        .collect();

    Ok(ExactJoint {
        spec: spec.clone(),
        rows,
    })
}

/// Exact push-forward of `p` through the independent per-bit channel.
fn apply_bit_channel(p: &mut [f64], bit_count: usize, noise: &NoiseModel) {
    for i in 0..bit_count {
        let a = noise.one_prob(i, 0); // P(1|0)
        let b = noise.one_prob(i, 1); // P(1|1)
        if a == 0.0 && b == 1.0 {
            continue;
        }
        let bit = 1usize << i;
        for base in 0..p.len() {
            if base & bit != 0 {
                continue;
            }
            let lo = p[base];
            let hi = p[base | bit];
            p[base] = lo * (1.0 - a) + hi * (1.0 - b);
            p[base | bit] = lo * a + hi * b;
        }
    }
}

/// Draw `spec.shots_per_key` i.i.d. shots per key from the exact distribution.
///
/// Key group `i` consumes only the child stream `derive_seed(seed, i)`, so the
/// output is identical no matter how groups are scheduled.
pub fn sample_dataset(
    spec: &ExperimentSpec,
    noise: &NoiseModel,
    seed: u64,
) -> Result<Dataset, CoreError> {
    let joint = exact_distribution(spec, noise)?;
    let mut groups = Vec::with_capacity(spec.keys.len());
    for ki in 0..spec.keys.len() {
        let cdf = cumulative(joint.row(ki));
        let mut stream = Stream::derived(seed, ki as u64);
        let group = (0..spec.shots_per_key)
            .map(|_| sample_cdf(&cdf, stream.next_f64()) as u16)
            .collect();
        groups.push(group);
    }
    Dataset::from_groups(spec.clone(), groups)
}

fn cumulative(p: &[f64]) -> Vec<f64> {
    let mut cdf = Vec::with_capacity(p.len());
    let mut acc = 0.0;
    for &x in p {
        acc += x;
        cdf.push(acc);
    }
    // guard the top against rounding so next_f64() < 1.0 always lands
    if let Some(last) = cdf.last_mut() {
        *last = 1.0;
    }
    cdf
}

fn sample_cdf(cdf: &[f64], x: f64) -> usize {
    cdf.partition_point(|&c| c <= x)
}

/// Find `lambda` whose exact pooled ridge-hit probability equals `target_p_hit`.
///
/// The pooled hit rate is monotone in `lambda`; bisection runs until the hit
/// probability matches within 1e-9. `q` and `bias` describe the fixed bit
/// channel the mixture is pushed through.
pub fn calibrate_lambda(
    spec: &ExperimentSpec,
    q: f64,
    bias: &[f64],
    target_p_hit: f64,
) -> Result<f64, CoreError> {
    const TOL: f64 = 1e-9;
    let hit_at = |lambda: f64| -> Result<f64, CoreError> {
        let noise = NoiseModel::new(lambda, q).with_bias(bias.to_vec());
        Ok(exact_distribution(spec, &noise)?.pooled_hit())
    };
    let floor = hit_at(0.0)?;
    let ceiling = hit_at(1.0)?;
    if !target_p_hit.is_finite() || target_p_hit <= floor + TOL || target_p_hit > ceiling + TOL {
        return Err(CoreError::InfeasibleTarget {
            target: target_p_hit,
            floor,
            ceiling,
        });
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let p = hit_at(mid)?;
        if libm::fabs(p - target_p_hit) <= TOL {
            return Ok(mid);
        }
        if p < target_p_hit {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
