//! Command-line interface: argument parsing and per-command drivers.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use mobridge_core::keyrec;
use mobridge_core::metrics;
use mobridge_core::sim::{calibrate_lambda, sample_dataset, NoiseModel};
use mobridge_core::stats::PermutationStatistic;
use mobridge_core::{diag, ExperimentSpec};

use crate::error::{CliError, Result};
use crate::heatmap::write_heatmaps;
use crate::report::{
    self, AblationFile, MetricsReport, MobiusReport, PermtestReport, ReliabilityReport, SpecEcho,
    UniformityFile, SCHEMA_VERSION,
};
use crate::shotfile;
use crate::suite::{self, ConfigFile, Stage, SuiteConfig, DEFAULT_SEED, DEMO_TARGET_P_HIT};

/// Environment variable overriding the default master seed.
pub const SEED_ENV: &str = "MOBRIDGE_SEED";

#[derive(Debug, Parser)]
#[command(
    name = "mobridge",
    version,
    about = "Simulate key-labeled modular-ridge measurement data and quantify ridge survival, \
             key recovery, and higher-order key information"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic shot file from the mixture/bit-flip noise model.
    Simulate(SimulateArgs),
    /// Ridge-hit statistics, key recovery, and optional heatmap grids.
    Metrics(MetricsArgs),
    /// Subset-lattice information decomposition (Möbius inversion).
    Mobius(MobiusArgs),
    /// Label-shuffle permutation test for accuracy or synergy.
    Permtest(PermtestArgs),
    /// Bootstrap reliability sweep over shots-per-key budgets.
    Reliability(ReliabilityArgs),
    /// Per-bit marginal and covariance sanity checks.
    Uniformity(UniformityArgs),
    /// Representation ablation with calibration scoring.
    Ablation(AblationArgs),
    /// Run every stage and write the consolidated report.
    Suite(SuiteArgs),
    /// Calibrate, simulate the default experiment, and run the full suite.
    Demo(DemoArgs),
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// Register width in bits (each shot carries 2n bits).
    #[arg(long, default_value_t = 4)]
    n: usize,
    /// Comma-separated key labels.
    #[arg(long, default_value = "1,3,5,7,2,4,8,12")]
    keys: String,
    #[arg(long, default_value_t = 1024)]
    shots_per_key: usize,
    /// Ridge-mixture weight in [0, 1].
    #[arg(long, conflicts_with = "calibrate_p_hit")]
    lambda: Option<f64>,
    /// Calibrate lambda so the exact pooled ridge-hit probability equals this.
    #[arg(long)]
    calibrate_p_hit: Option<f64>,
    /// Independent per-bit flip probability in [0, 0.5].
    #[arg(long, default_value_t = 0.0)]
    q: f64,
    /// Comma-separated per-bit one-probability offsets (2n values).
    #[arg(long)]
    bias: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output shot file.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct MetricsArgs {
    /// Input shot file.
    #[arg(long = "in")]
    input: PathBuf,
    /// Report file (stdout when omitted).
    #[arg(long)]
    report: Option<PathBuf>,
    /// Directory for per-key heatmap grids.
    #[arg(long)]
    heatmaps: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 2000)]
    bootstrap_replicates: usize,
}

#[derive(Debug, Args)]
struct MobiusArgs {
    #[arg(long = "in")]
    input: PathBuf,
    /// Truncation order of the subset lattice.
    #[arg(long, default_value_t = 3)]
    kmax: usize,
    /// Restrict the analysis to these comma-separated keys.
    #[arg(long)]
    keys_slice: Option<String>,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum StatisticArg {
    /// Per-shot ridge-classifier accuracy.
    Accuracy,
    /// Targeted order-kmax positive synergy.
    Cps,
}

#[derive(Debug, Args)]
struct PermtestArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, value_enum)]
    statistic: StatisticArg,
    /// Permutation count (default 500 for accuracy, 200 for cps).
    #[arg(long)]
    n_perm: Option<usize>,
    #[arg(long, default_value_t = 3)]
    kmax: usize,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ReliabilityArgs {
    #[arg(long = "in")]
    input: PathBuf,
    /// Comma-separated shots-per-key budgets.
    #[arg(long, default_value = "128,256,512,768,1024")]
    budgets: String,
    #[arg(long, default_value_t = 100)]
    replicates: usize,
    #[arg(long, default_value_t = 3)]
    kmax: usize,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct UniformityArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct AblationArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Equal-width calibration bins over top-label confidence.
    #[arg(long, default_value_t = 10)]
    bins: usize,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SuiteArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// JSON config file; flags take precedence over its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Worker cap for permutation and bootstrap loops.
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    report: PathBuf,
}

#[derive(Debug, Args)]
struct DemoArgs {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    threads: Option<usize>,
    /// Where the simulated shot file is written.
    #[arg(long, default_value = "demo_shots.txt")]
    out: PathBuf,
    #[arg(long, default_value = "demo_report.json")]
    report: PathBuf,
}

/// Parse arguments and run; returns the process exit code path via errors.
pub fn run() -> Result<()> {
    match Cli::parse().command {
        Command::Simulate(args) => simulate(args),
        Command::Metrics(args) => metrics_cmd(args),
        Command::Mobius(args) => mobius_cmd(args),
        Command::Permtest(args) => permtest_cmd(args),
        Command::Reliability(args) => reliability_cmd(args),
        Command::Uniformity(args) => uniformity_cmd(args),
        Command::Ablation(args) => ablation_cmd(args),
        Command::Suite(args) => suite_cmd(args),
        Command::Demo(args) => demo_cmd(args),
    }
}

/// Seed precedence: flag, then `MOBRIDGE_SEED`, then the built-in default.
fn resolve_seed(flag: Option<u64>) -> Result<u64> {
    if let Some(seed) = flag {
        return Ok(seed);
    }
    match std::env::var(SEED_ENV) {
        Ok(text) => text
            .parse()
            .map_err(|_| CliError::input(format!("{SEED_ENV}={text} is not a valid u64 seed"))),
        Err(_) => Ok(DEFAULT_SEED),
    }
}

fn parse_csv<T: std::str::FromStr>(text: &str, what: &str) -> Result<Vec<T>> {
    text.split(',')
        .map(|part| {
            part.trim()
                .parse::<T>()
                .map_err(|_| CliError::input(format!("invalid {what} entry `{part}`")))
        })
        .collect()
}

fn write_report_to<T: serde::Serialize>(path: Option<&Path>, value: &T) -> Result<()> {
    let json = report::to_json(value)?;
    match path {
        Some(path) => fs::write(path, json)
            .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?,
        None => print!("{json}"),
    }
    Ok(())
}

fn simulate(args: SimulateArgs) -> Result<()> {
    let keys = parse_csv::<u32>(&args.keys, "key")?;
    let spec = ExperimentSpec::new(args.n, keys, args.shots_per_key)?;
    let bias = match &args.bias {
        Some(text) => parse_csv::<f64>(text, "bias")?,
        None => Vec::new(),
    };
    let lambda = match (args.lambda, args.calibrate_p_hit) {
        (Some(lambda), None) => lambda,
        (None, Some(target)) => calibrate_lambda(&spec, args.q, &bias, target)?,
        (None, None) => {
            return Err(CliError::input(
                "provide exactly one of --lambda or --calibrate-p-hit",
            ))
        }
        (Some(_), Some(_)) => unreachable!("clap rejects conflicting flags"),
    };
    let noise = NoiseModel::new(lambda, args.q).with_bias(bias);
    let seed = resolve_seed(args.seed)?;
    let ds = sample_dataset(&spec, &noise, seed)?;
    shotfile::save_dataset(&ds, &args.out)?;
    eprintln!(
        "wrote {} shots ({} keys x {}) to {} [lambda = {lambda}, q = {}, seed = {seed}]",
        ds.total_shots(),
        spec.keys.len(),
        spec.shots_per_key,
        args.out.display(),
        args.q,
    );
    Ok(())
}

fn metrics_cmd(args: MetricsArgs) -> Result<()> {
    let ds = shotfile::load_dataset(&args.input, None)?;
    let seed = resolve_seed(args.seed)?;
    let ridge = metrics::ridge_stats(
        &ds,
        args.bootstrap_replicates,
        suite::stage_seed(seed, Stage::Bootstrap),
    )?;
    let accuracy = keyrec::per_shot_accuracy(&ds, suite::stage_seed(seed, Stage::TieBreak))?;
    let dictionary = keyrec::dictionary_recovery(&ds)?;
    let out = MetricsReport {
        schema_version: SCHEMA_VERSION,
        spec: SpecEcho::new(&ds),
        ridge,
        key_recovery: report::KeyRecovery::new(&accuracy, &dictionary),
    };
    if let Some(dir) = &args.heatmaps {
        write_heatmaps(&ds, dir)?;
    }
    write_report_to(args.report.as_deref(), &out)
}

fn mobius_cmd(args: MobiusArgs) -> Result<()> {
    let mut ds = shotfile::load_dataset(&args.input, None)?;
    if let Some(slice) = &args.keys_slice {
        let keys = parse_csv::<u32>(slice, "key")?;
        ds = ds.restrict_keys(&keys)?;
    }
    let lattice = suite::lattice_summary(&ds, args.kmax)?;
    let out = MobiusReport {
        schema_version: SCHEMA_VERSION,
        spec: SpecEcho::new(&ds),
        lattice,
    };
    write_report_to(args.report.as_deref(), &out)
}

fn permtest_cmd(args: PermtestArgs) -> Result<()> {
    let ds = shotfile::load_dataset(&args.input, None)?;
    let seed = resolve_seed(args.seed)?;
    let (statistic, stage, default_n) = match args.statistic {
        StatisticArg::Accuracy => (PermutationStatistic::Accuracy, Stage::PermutationAccuracy, 500),
        StatisticArg::Cps => (PermutationStatistic::Synergy, Stage::PermutationSynergy, 200),
    };
    let n_perm = args.n_perm.unwrap_or(default_n);
    let result = suite::permutation(
        &ds,
        statistic,
        n_perm,
        args.kmax,
        suite::stage_seed(seed, stage),
        1,
    )?;
    let out = PermtestReport {
        schema_version: SCHEMA_VERSION,
        spec: SpecEcho::new(&ds),
        k_max: args.kmax,
        result,
    };
    write_report_to(args.report.as_deref(), &out)
}

fn reliability_cmd(args: ReliabilityArgs) -> Result<()> {
    let ds = shotfile::load_dataset(&args.input, None)?;
    let seed = resolve_seed(args.seed)?;
    let budgets = parse_csv::<usize>(&args.budgets, "budget")?;
    let summary = suite::reliability(
        &ds,
        &budgets,
        args.replicates,
        args.kmax,
        suite::stage_seed(seed, Stage::Reliability),
        1,
    )?;
    let out = ReliabilityReport {
        schema_version: SCHEMA_VERSION,
        spec: SpecEcho::new(&ds),
        k_max: args.kmax,
        replicates: summary.replicates,
        budgets: summary.budgets,
        points: summary.points,
    };
    write_report_to(args.report.as_deref(), &out)
}

fn uniformity_cmd(args: UniformityArgs) -> Result<()> {
    let ds = shotfile::load_dataset(&args.input, None)?;
    let out = UniformityFile {
        schema_version: SCHEMA_VERSION,
        spec: SpecEcho::new(&ds),
        uniformity: diag::uniformity(&ds)?,
    };
    write_report_to(args.report.as_deref(), &out)
}

fn ablation_cmd(args: AblationArgs) -> Result<()> {
    let ds = shotfile::load_dataset(&args.input, None)?;
    let seed = resolve_seed(args.seed)?;
    let ablation = diag::run_ablation(&ds, suite::stage_seed(seed, Stage::AblationSplit), args.bins)?;
    let out = AblationFile {
        schema_version: SCHEMA_VERSION,
        spec: SpecEcho::new(&ds),
        bins: args.bins,
        ablation,
    };
    write_report_to(args.report.as_deref(), &out)
}

fn build_config(
    seed: Option<u64>,
    config: Option<&Path>,
    threads: Option<usize>,
) -> Result<SuiteConfig> {
    let mut cfg = SuiteConfig {
        master_seed: resolve_seed(None)?, // env or built-in default
        ..SuiteConfig::default()
    };
    if let Some(path) = config {
        ConfigFile::load(path)?.apply(&mut cfg);
    }
    if let Some(seed) = seed {
        cfg.master_seed = seed;
    }
    if let Some(threads) = threads {
        if threads == 0 {
            return Err(CliError::input("--threads must be at least 1"));
        }
        cfg.threads = threads;
    }
    Ok(cfg)
}

fn suite_cmd(args: SuiteArgs) -> Result<()> {
    let bytes = fs::read(&args.input)
        .map_err(|e| CliError::input(format!("{}: {e}", args.input.display())))?;
    let text = String::from_utf8(bytes.clone())
        .map_err(|_| CliError::input(format!("{}: not valid UTF-8", args.input.display())))?;
    let ds = shotfile::parse_shot_file(&text, None)?;
    let cfg = build_config(args.seed, args.config.as_deref(), args.threads)?;
    let report = suite::run_suite(
        &ds,
        &cfg,
        &args.input.display().to_string(),
        suite::sha256_hex(&bytes),
    )?;
    let json = report::to_json(&report)?;
    fs::write(&args.report, json)
        .map_err(|e| CliError::input(format!("{}: {e}", args.report.display())))?;
    eprintln!("wrote suite report to {}", args.report.display());
    Ok(())
}

fn demo_cmd(args: DemoArgs) -> Result<()> {
    let cfg = build_config(args.seed, args.config.as_deref(), args.threads)?;
    let (ds, lambda) = suite::demo(&cfg)?;
    shotfile::save_dataset(&ds, &args.out)?;
    let bytes = fs::read(&args.out)
        .map_err(|e| CliError::input(format!("{}: {e}", args.out.display())))?;
    let report = suite::run_suite(
        &ds,
        &cfg,
        &args.out.display().to_string(),
        suite::sha256_hex(&bytes),
    )?;
    let json = report::to_json(&report)?;
    fs::write(&args.report, json)
        .map_err(|e| CliError::input(format!("{}: {e}", args.report.display())))?;
    eprintln!(
        "demo: calibrated lambda = {lambda} (target p_hit = {DEMO_TARGET_P_HIT}); \
         shots in {}, report in {}",
        args.out.display(),
        args.report.display()
    );
    Ok(())
}
