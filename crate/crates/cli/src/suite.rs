//! Full-pipeline orchestration and the reproduction entry point.
//!
//! Every stochastic stage consumes a seed derived from one master seed via
//! a fixed stage id, so a suite run is reproducible end to end and any
//! single subcommand re-run with the same master seed reproduces its
//! section of the suite report.

use std::fs;
use std::path::Path;

use serde::Deserialize;
use sha2::{Digest, Sha256};

use mobridge_core::diag;
use mobridge_core::keyrec;
use mobridge_core::lattice::{compute_g, mobius_invert, positive_mass, KeyedJoint};
use mobridge_core::metrics;
use mobridge_core::rng::derive_seed;
use mobridge_core::sim::{calibrate_lambda, sample_dataset, NoiseModel};
use mobridge_core::stats::{
    summarize_order_masses, PermutationPlan, PermutationStatistic, ReliabilityPlan,
};
use mobridge_core::{Dataset, ExperimentSpec};

use crate::error::{CliError, Result};
use crate::parallel::indexed_map;
use crate::report::{
    f_table, KeyRecovery, LatticeSummary, PermutationSummary, Provenance, ReliabilitySummary,
    SpecEcho, StageSeeds, SuiteReport, SCHEMA_VERSION,
};

/// Pipeline stages with fixed seed-derivation ids.
#[derive(Debug, Clone, Copy)]
pub enum Stage {
    Simulate = 0,
    Bootstrap = 1,
    TieBreak = 2,
    PermutationAccuracy = 3,
    PermutationSynergy = 4,
    Reliability = 5,
    AblationSplit = 6,
}

/// Seed consumed by `stage` under `master_seed`.
pub fn stage_seed(master_seed: u64, stage: Stage) -> u64 {
    derive_seed(master_seed, stage as u64)
}

pub fn stage_seeds(master_seed: u64) -> StageSeeds {
    StageSeeds {
        simulate: stage_seed(master_seed, Stage::Simulate),
        bootstrap: stage_seed(master_seed, Stage::Bootstrap),
        tie_break: stage_seed(master_seed, Stage::TieBreak),
        permutation_accuracy: stage_seed(master_seed, Stage::PermutationAccuracy),
        permutation_synergy: stage_seed(master_seed, Stage::PermutationSynergy),
        reliability: stage_seed(master_seed, Stage::Reliability),
        ablation_split: stage_seed(master_seed, Stage::AblationSplit),
    }
}

/// Hit probability the demo calibrates its mixture weight to.
pub const DEMO_TARGET_P_HIT: f64 = 0.1830;

/// Default master seed when neither flag, config, nor env provides one.
pub const DEFAULT_SEED: u64 = 42;

/// Resolved suite parameters (defaults, config file, then flags).
#[derive(Debug, Clone, PartialEq)]
pub struct SuiteConfig {
    pub master_seed: u64,
    pub bootstrap_replicates: usize,
    pub n_perm_accuracy: usize,
    pub n_perm_synergy: usize,
    pub k_max: usize,
    pub budgets: Vec<usize>,
    pub reliability_replicates: usize,
    pub bins: usize,
    pub threads: usize,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            master_seed: DEFAULT_SEED,
            bootstrap_replicates: 2000,
            n_perm_accuracy: 500,
            n_perm_synergy: 200,
            k_max: 3,
            budgets: vec![128, 256, 512, 768, 1024],
            reliability_replicates: 100,
            bins: 10,
            threads: 1,
        }
    }
}

/// Optional config-file overrides; flags still win over these.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub seed: Option<u64>,
    pub bootstrap_replicates: Option<usize>,
    pub n_perm_accuracy: Option<usize>,
    pub n_perm_synergy: Option<usize>,
    pub k_max: Option<usize>,
    pub budgets: Option<Vec<usize>>,
    pub reliability_replicates: Option<usize>,
    pub bins: Option<usize>,
    pub threads: Option<usize>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::input(format!("{}: {e}", path.display())))
    }

    pub fn apply(&self, cfg: &mut SuiteConfig) {
        if let Some(v) = self.seed {
            cfg.master_seed = v;
        }
        if let Some(v) = self.bootstrap_replicates {
            cfg.bootstrap_replicates = v;
        }
        if let Some(v) = self.n_perm_accuracy {
            cfg.n_perm_accuracy = v;
        }
        if let Some(v) = self.n_perm_synergy {
            cfg.n_perm_synergy = v;
        }
        if let Some(v) = self.k_max {
            cfg.k_max = v;
        }
        if let Some(v) = &self.budgets {
            cfg.budgets = v.clone();
        }
        if let Some(v) = self.reliability_replicates {
            cfg.reliability_replicates = v;
        }
        if let Some(v) = self.bins {
            cfg.bins = v;
        }
        if let Some(v) = self.threads {
            cfg.threads = v;
        }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    let mut out = String::with_capacity(64);
    for byte in digest {
        out.push_str(&format!("{byte:02x}"));
    }
    out
}

/// Run every analysis stage on `ds` and assemble the consolidated report.
///
/// Stage order: metrics, keyrec, infolattice, stats, diagnostics. Any stage
/// error aborts before a report value exists, so partial reports are never
/// written by callers.
pub fn run_suite(
    ds: &Dataset,
    cfg: &SuiteConfig,
    input_path: &str,
    input_sha256: String,
) -> Result<SuiteReport> {
    let seed = cfg.master_seed;

    let ridge = metrics::ridge_stats(ds, cfg.bootstrap_replicates, stage_seed(seed, Stage::Bootstrap))
        .map_err(|e| CliError::from(e).in_stage("metrics"))?;

    let accuracy = keyrec::per_shot_accuracy(ds, stage_seed(seed, Stage::TieBreak))
        .map_err(|e| CliError::from(e).in_stage("keyrec"))?;
    let dictionary =
        keyrec::dictionary_recovery(ds).map_err(|e| CliError::from(e).in_stage("keyrec"))?;

    let lattice = lattice_summary(ds, cfg.k_max).map_err(|e| e.in_stage("infolattice"))?;

    let perm_accuracy = permutation(
        ds,
        PermutationStatistic::Accuracy,
        cfg.n_perm_accuracy,
        cfg.k_max,
        stage_seed(seed, Stage::PermutationAccuracy),
        cfg.threads,
    )
    .map_err(|e| e.in_stage("stats"))?;
    let perm_synergy = permutation(
        ds,
        PermutationStatistic::Synergy,
        cfg.n_perm_synergy,
        cfg.k_max,
        stage_seed(seed, Stage::PermutationSynergy),
        cfg.threads,
    )
    .map_err(|e| e.in_stage("stats"))?;

    let reliability = reliability(
        ds,
        &cfg.budgets,
        cfg.reliability_replicates,
        cfg.k_max,
        stage_seed(seed, Stage::Reliability),
        cfg.threads,
    )
    .map_err(|e| e.in_stage("stats"))?;

    let uniformity =
        diag::uniformity(ds).map_err(|e| CliError::from(e).in_stage("diagnostics"))?;
    let ablation = diag::run_ablation(ds, stage_seed(seed, Stage::AblationSplit), cfg.bins)
        .map_err(|e| CliError::from(e).in_stage("diagnostics"))?;

    Ok(SuiteReport {
        schema_version: SCHEMA_VERSION,
        provenance: Provenance {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            master_seed: seed,
            input_path: input_path.to_string(),
            input_sha256,
            stage_seeds: stage_seeds(seed),
        },
        spec: SpecEcho::new(ds),
        ridge,
        key_recovery: KeyRecovery::new(&accuracy, &dictionary),
        lattice,
        permutation: PermutationSummary {
            accuracy: perm_accuracy,
            synergy: perm_synergy,
        },
        reliability,
        uniformity,
        ablation,
    })
}

/// Lattice section: g, Möbius inversion, order masses, f-table.
pub fn lattice_summary(ds: &Dataset, k_max: usize) -> Result<LatticeSummary> {
    let joint = KeyedJoint::from_dataset(ds);
    let g = compute_g(&joint, k_max)?;
    let f = mobius_invert(&g);
    let n = ds.spec().n;
    let orders = positive_mass(&f, n);
    let synergy = orders.last().map(|m| m.positive_mass).unwrap_or(0.0);
    Ok(LatticeSummary {
        k_max,
        unit: "bits".to_string(),
        orders,
        synergy,
        f_table: f_table(&f, n),
    })
}

/// Permutation test with nulls evaluated across `threads` workers.
pub fn permutation(
    ds: &Dataset,
    statistic: PermutationStatistic,
    n_perm: usize,
    k_max: usize,
    seed: u64,
    threads: usize,
) -> Result<mobridge_core::stats::PermutationResult> {
    if n_perm == 0 {
        return Err(CliError::input("permutation test needs n_perm >= 1"));
    }
    let plan = PermutationPlan::new(ds, statistic, k_max, seed)?;
    plan.observed()?; // surface parameter errors before spawning workers
    let nulls = indexed_map(n_perm, threads, |j| plan.null_value(j))
        .into_iter()
        .collect::<std::result::Result<Vec<f64>, _>>()?;
    Ok(plan.finish(nulls)?)
}

/// Reliability sweep with replicates evaluated across `threads` workers.
pub fn reliability(
    ds: &Dataset,
    budgets: &[usize],
    replicates: usize,
    k_max: usize,
    seed: u64,
    threads: usize,
) -> Result<ReliabilitySummary> {
    if replicates < 50 {
        return Err(CliError::input(format!(
            "reliability sweep needs >= 50 replicates, got {replicates}"
        )));
    }
    let min_group = ds.min_group_size();
    for &budget in budgets {
        if budget == 0 || budget > min_group {
            return Err(CliError::input(format!(
                "budget {budget} exceeds smallest key group ({min_group})"
            )));
        }
    }
    let plan = ReliabilityPlan::new(ds, k_max, seed)?;
    let mut points = Vec::with_capacity(budgets.len());
    for &budget in budgets {
        let samples = indexed_map(replicates, threads, |r| plan.replicate(budget, r as u64))
            .into_iter()
            .collect::<std::result::Result<Vec<Vec<f64>>, _>>()?;
        points.push(summarize_order_masses(budget, &samples));
    }
    Ok(ReliabilitySummary {
        replicates,
        budgets: budgets.to_vec(),
        points,
    })
}

/// Calibrate, simulate the default experiment, and run the full suite.
///
/// Returns the simulated dataset alongside the report; callers persist both.
pub fn demo(cfg: &SuiteConfig) -> Result<(Dataset, f64)> {
    let spec = ExperimentSpec::default();
    let lambda = calibrate_lambda(&spec, 0.0, &[], DEMO_TARGET_P_HIT)?;
    let ds = sample_dataset(
        &spec,
        &NoiseModel::new(lambda, 0.0),
        stage_seed(cfg.master_seed, Stage::Simulate),
    )?;
    Ok((ds, lambda))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stage_seeds_are_distinct() {
        let seeds = stage_seeds(42);
        let all = [
            seeds.simulate,
            seeds.bootstrap,
            seeds.tie_break,
            seeds.permutation_accuracy,
            seeds.permutation_synergy,
            seeds.reliability,
            seeds.ablation_split,
        ];
        for (i, a) in all.iter().enumerate() {
            for b in &all[i + 1..] {
                assert_ne!(a, b);
            }
        }
    }

    #[test]
    fn config_precedence_is_flags_over_file_over_defaults() {
        let mut cfg = SuiteConfig::default();
        let file = ConfigFile {
            seed: Some(7),
            bins: Some(20),
            ..ConfigFile::default()
        };
        file.apply(&mut cfg);
        assert_eq!(cfg.master_seed, 7);
        assert_eq!(cfg.bins, 20);
        assert_eq!(cfg.n_perm_accuracy, 500); // untouched default
        // a later flag assignment wins
        cfg.master_seed = 99;
        assert_eq!(cfg.master_seed, 99);
    }

    #[test]
    fn sha256_matches_known_vector() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn threaded_and_serial_permutations_agree() {
        let spec = ExperimentSpec::default();
        let ds = sample_dataset(&spec, &NoiseModel::new(0.3, 0.05), 9).unwrap();
        let serial = permutation(&ds, PermutationStatistic::Synergy, 24, 3, 5, 1).unwrap();
        let threaded = permutation(&ds, PermutationStatistic::Synergy, 24, 3, 5, 4).unwrap();
        assert_eq!(serial, threaded);
    }

    #[test]
    fn threaded_and_serial_reliability_agree() {
        let spec = ExperimentSpec::default();
        let ds = sample_dataset(&spec, &NoiseModel::new(0.3, 0.05), 10).unwrap();
        let serial = reliability(&ds, &[128, 256], 50, 3, 5, 1).unwrap();
        let threaded = reliability(&ds, &[128, 256], 50, 3, 5, 3).unwrap();
        assert_eq!(serial, threaded);
    }
}
