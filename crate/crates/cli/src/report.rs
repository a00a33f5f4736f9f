//! Machine-readable report schemas.
//!
//! Every command emits a JSON document; `suite` and `demo` emit the full
//! [`SuiteReport`]. Serialization is deterministic (struct field order,
//! vectors instead of maps) and rejects non-finite numbers, and every
//! report parses back into an equal value.

use serde::{Deserialize, Serialize};

use mobridge_core::diag::{AblationReport, RegisterTag, UniformityReport};
use mobridge_core::keyrec::{AccuracyStats, GroupPrediction};
use mobridge_core::lattice::{BitSubset, LatticeFunction, OrderMass};
use mobridge_core::metrics::RidgeStats;
use mobridge_core::stats::{PermutationResult, ReliabilityPoint};
use mobridge_core::{Dataset, ExperimentSpec};

use crate::error::Result;

pub const SCHEMA_VERSION: u32 = 1;

/// Experiment layout echoed into every report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpecEcho {
    pub n: usize,
    pub keys: Vec<u32>,
    pub shots_per_key: usize,
    pub group_sizes: Vec<usize>,
    pub total_shots: usize,
}

impl SpecEcho {
    pub fn new(ds: &Dataset) -> Self {
        Self {
            n: ds.spec().n,
            keys: ds.spec().keys.clone(),
            shots_per_key: ds.spec().shots_per_key,
            group_sizes: ds.group_sizes(),
            total_shots: ds.total_shots(),
        }
    }

    pub fn spec(&self) -> ExperimentSpec {
        ExperimentSpec {
            n: self.n,
            keys: self.keys.clone(),
            shots_per_key: self.shots_per_key,
        }
    }
}

/// Input digest, seeds, and tool identity behind a report.
///
/// Execution details that do not affect results (thread count) are
/// deliberately absent so equal inputs give byte-identical reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool_version: String,
    pub master_seed: u64,
    pub input_path: String,
    pub input_sha256: String,
    pub stage_seeds: StageSeeds,
}

/// Per-stage seeds derived from the master seed; re-running a single
/// subcommand with the master seed reproduces the matching suite section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageSeeds {
    pub simulate: u64,
    pub bootstrap: u64,
    pub tie_break: u64,
    pub permutation_accuracy: u64,
    pub permutation_synergy: u64,
    pub reliability: u64,
    pub ablation_split: u64,
}

/// One Möbius coefficient row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FTableRow {
    pub mask: u16,
    /// 1-based bit positions in the subset.
    pub bits: Vec<usize>,
    pub order: usize,
    pub value: f64,
    pub tag: RegisterTag,
}

/// Register tag of a subset for the f-table.
pub fn subset_tag(subset: BitSubset, n: usize) -> RegisterTag {
    let a_mask = (1u16 << n) - 1;
    if subset.0 & a_mask == subset.0 {
        RegisterTag::WithinA
    } else if subset.0 & !a_mask == subset.0 {
        RegisterTag::WithinB
    } else {
        RegisterTag::Cross
    }
}

/// Flatten a Möbius lattice into report rows (ascending mask order).
pub fn f_table(f: &LatticeFunction, n: usize) -> Vec<FTableRow> {
    f.subsets()
        .map(|s| FTableRow {
            mask: s.0,
            bits: s.positions(),
            order: s.order(),
            value: f.get(s),
            tag: subset_tag(s, n),
        })
        .collect()
}

/// Lattice decomposition section of a report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticeSummary {
    pub k_max: usize,
    /// Information unit of every value in this section.
    pub unit: String,
    pub orders: Vec<OrderMass>,
    /// Top-order positive mass (the targeted synergy score).
    pub synergy: f64,
    pub f_table: Vec<FTableRow>,
}

/// Key-recovery section: per-shot classification plus dictionary attack.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeyRecovery {
    pub key_accuracy: f64,
    pub key_accuracy_ci: (f64, f64),
    pub correct: u64,
    pub total: u64,
    pub dictionary_predictions: Vec<GroupPrediction>,
    pub dictionary_accuracy: f64,
}

impl KeyRecovery {
    pub fn new(acc: &AccuracyStats, dict: &mobridge_core::keyrec::DictionaryRecovery) -> Self {
        Self {
            key_accuracy: acc.accuracy,
            key_accuracy_ci: acc.ci,
            correct: acc.correct,
            total: acc.total,
            dictionary_predictions: dict.predictions.clone(),
            dictionary_accuracy: dict.accuracy,
        }
    }
}

/// Standalone `metrics` report: ridge statistics plus key recovery.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub schema_version: u32,
    pub spec: SpecEcho,
    pub ridge: RidgeStats,
    #[serde(flatten)]
    pub key_recovery: KeyRecovery,
}

/// Standalone `mobius` report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MobiusReport {
    pub schema_version: u32,
    pub spec: SpecEcho,
    #[serde(flatten)]
    pub lattice: LatticeSummary,
}

/// Standalone `permtest` report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PermtestReport {
    pub schema_version: u32,
    pub spec: SpecEcho,
    pub k_max: usize,
    #[serde(flatten)]
    pub result: PermutationResult,
}

/// Standalone `reliability` report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReliabilityReport {
    pub schema_version: u32,
    pub spec: SpecEcho,
    pub k_max: usize,
    pub replicates: usize,
    pub budgets: Vec<usize>,
    pub points: Vec<ReliabilityPoint>,
}

/// Standalone `uniformity` report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniformityFile {
    pub schema_version: u32,
    pub spec: SpecEcho,
    #[serde(flatten)]
    pub uniformity: UniformityReport,
}

/// Standalone `ablation` report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationFile {
    pub schema_version: u32,
    pub spec: SpecEcho,
    pub bins: usize,
    #[serde(flatten)]
    pub ablation: AblationReport,
}

/// Permutation section of the suite report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PermutationSummary {
    pub accuracy: PermutationResult,
    pub synergy: PermutationResult,
}

/// Reliability section of the suite report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReliabilitySummary {
    pub replicates: usize,
    pub budgets: Vec<usize>,
    pub points: Vec<ReliabilityPoint>,
}

/// The consolidated evaluation report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub schema_version: u32,
    pub provenance: Provenance,
    pub spec: SpecEcho,
    pub ridge: RidgeStats,
    pub key_recovery: KeyRecovery,
    pub lattice: LatticeSummary,
    pub permutation: PermutationSummary,
    pub reliability: ReliabilitySummary,
    pub uniformity: UniformityReport,
    pub ablation: AblationReport,
}

/// Render any report as pretty JSON with a trailing newline.
///
/// Fails (exit code 3) if a non-finite number reaches the report: serde_json
/// would silently write `null`, so the tree is checked first. The only field
/// allowed to be absent is a reliability `cv` (undefined at zero mean).
pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let tree = serde_json::to_value(value)?;
    check_no_unexpected_null(&tree, "$")?;
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    Ok(text)
}

fn check_no_unexpected_null(value: &serde_json::Value, path: &str) -> Result<()> {
    use serde_json::Value;
    match value {
        Value::Null => {
            if path.ends_with(".cv") {
                Ok(())
            } else {
                Err(crate::error::CliError::numeric(format!(
                    "non-finite or missing numeric value at {path}"
                )))
            }
        }
        Value::Array(items) => {
            for (i, item) in items.iter().enumerate() {
                check_no_unexpected_null(item, &format!("{path}[{i}]"))?;
            }
            Ok(())
        }
        Value::Object(map) => {
            for (key, item) in map {
                check_no_unexpected_null(item, &format!("{path}.{key}"))?;
            }
            Ok(())
        }
        _ => Ok(()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use mobridge_core::lattice::LatticeFunction;

    #[test]
    fn f_table_tags_follow_register_split() {
        let mut f = LatticeFunction::zeroed(8, 2).unwrap();
        f.set(BitSubset(0b0000_0011), 1.0);
        let rows = f_table(&f, 4);
        assert_eq!(rows.len(), 8 + 28);
        let row = rows.iter().find(|r| r.mask == 0b0000_0011).unwrap();
        assert_eq!(row.tag, RegisterTag::WithinA);
        assert_eq!(row.bits, vec![1, 2]);
        assert_eq!(row.value, 1.0);
        let cross = rows.iter().find(|r| r.mask == 0b0001_0001).unwrap();
        assert_eq!(cross.tag, RegisterTag::Cross);
        let within_b = rows.iter().find(|r| r.mask == 0b1100_0000).unwrap();
        assert_eq!(within_b.tag, RegisterTag::WithinB);
    }

    #[test]
    fn non_finite_values_are_rejected() {
        #[derive(Serialize)]
        struct Bad {
            x: f64,
        }
        let err = to_json(&Bad { x: f64::NAN }).unwrap_err();
        assert_eq!(err.exit_code(), 3);
    }
}
