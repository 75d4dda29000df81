//! Command-line front end: `suite run`, `check <name>` and `tensor show <file>`.
//!
//! Exit codes: 0 when every report passes, 1 when some check fails, 2 for
//! configuration and I/O errors.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::tensor::DenseTensor;
use crate::verify::{
    is_family, run_trial, trial_seed, CheckOptions, CheckReport, GridConfig, Jan11Variant, FAMILIES,
};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

pub const DEFAULT_SEED: u64 = 20_031;
pub const DEFAULT_SUITE_TRIALS: usize = 10;
pub const SEED_ENV: &str = "SUITE_SEED";
/// `k_max` above this needs `--allow-large-k`.
pub const K_MAX_LIMIT: usize = 3;
const N_LIMIT: usize = 8;

#[derive(Debug, Parser)]
#[command(
    name = "hadamard-spectral",
    version,
    about = "Randomized verification of generalized Hadamard product and eigenvalue perturbation identities"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the verification suite.
    Suite {
        #[command(subcommand)]
        action: SuiteAction,
    },
    /// Run a single check family.
    Check(CheckArgs),
    /// Inspect tensor JSON files.
    Tensor {
        #[command(subcommand)]
        action: TensorAction,
    },
}

#[derive(Debug, Subcommand)]
pub enum SuiteAction {
    /// Run every registered check (or those given with --only).
    Run(SuiteArgs),
}

#[derive(Debug, Subcommand)]
pub enum TensorAction {
    /// Print a summary and the nonzero entries of a tensor file.
    Show { file: PathBuf },
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Master seed (falls back to $SUITE_SEED, then a fixed default).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Dimensions to test, comma separated.
    #[arg(long = "n", value_delimiter = ',', default_values_t = vec![3usize, 4])]
    pub n_list: Vec<usize>,
    /// Largest tensor order.
    #[arg(long = "kmax", default_value_t = 3)]
    pub k_max: usize,
    /// Repetitions per check family.
    #[arg(long)]
    pub trials: Option<usize>,
    /// Scales for limit checks, comma separated, strictly decreasing.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub scales: Option<Vec<f64>>,
    /// Tolerance for grouping equal coordinates of mu into blocks.
    #[arg(
        long = "block-tol",
        default_value_t = 0.0,
        allow_negative_numbers = true
    )]
    pub block_tol: f64,
    /// Residual tolerance replacing the defaults of exact checks.
    #[arg(long = "tol-override", allow_negative_numbers = true)]
    pub tol_override: Option<f64>,
    /// Write the JSON report to this file.
    #[arg(long = "json")]
    pub json: Option<PathBuf>,
    /// Re-verify generated inputs before each evaluation.
    #[arg(long)]
    pub paranoid: bool,
    /// Permit --kmax above 3 (dense tensors grow as n^(2k+2)).
    #[arg(long = "allow-large-k")]
    pub allow_large_k: bool,
}

#[derive(Debug, Clone, Args)]
pub struct SuiteArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Restrict the suite to these checks, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub only: Vec<String>,
}

#[derive(Debug, Clone, Args)]
pub struct CheckArgs {
    /// Check family name, e.g. check_dec14b.
    pub name: String,
    #[command(flatten)]
    pub common: CommonArgs,
    /// Part of check_dec15a (1-2) or check_dec15b (1-3).
    #[arg(long)]
    pub part: Option<u8>,
    /// Variant of check_jan11: a1, a2, abc1 or abc2.
    #[arg(long)]
    pub variant: Option<String>,
    /// Replay a single trial from the seed printed in a report.
    #[arg(long = "trial-seed")]
    pub trial_seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteConfig {
    pub seed: u64,
    pub n_list: Vec<usize>,
    pub k_max: usize,
    pub trials: usize,
    pub scales: Vec<f64>,
    pub block_tol: f64,
    pub tol_override: Option<f64>,
    pub output_path: Option<PathBuf>,
    pub paranoid: bool,
    pub allow_large_k: bool,
    pub only: Vec<String>,
    pub part: Option<u8>,
    pub variant: Option<Jan11Variant>,
    pub trial_seed: Option<u64>,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig {
            seed: DEFAULT_SEED,
            n_list: vec![3, 4],
            k_max: 3,
            trials: DEFAULT_SUITE_TRIALS,
            scales: crate::verify::DEFAULT_SCALES.to_vec(),
            block_tol: 0.0,
            tol_override: None,
            output_path: None,
            paranoid: false,
            allow_large_k: false,
            only: Vec::new(),
            part: None,
            variant: None,
            trial_seed: None,
        }
    }
}

impl SuiteConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.k_max == 0 {
            return Err("--kmax must be at least 1".into());
        }
        if self.k_max > K_MAX_LIMIT && !self.allow_large_k {
            return Err(format!(
                "--kmax {} exceeds {K_MAX_LIMIT}; pass --allow-large-k to override",
                self.k_max
            ));
        }
        if self.n_list.is_empty() {
            return Err("--n needs at least one dimension".into());
        }
        if let Some(&n) = self.n_list.iter().find(|&&n| !(2..=N_LIMIT).contains(&n)) {
            return Err(format!("dimension {n} outside 2..={N_LIMIT}"));
        }
        if self.trials == 0 {
            return Err("--trials must be positive".into());
        }
        if self.scales.len() < 2 {
            return Err("--scales needs at least two values".into());
        }
        if self.scales.iter().any(|&t| !(t > 0.0 && t.is_finite()))
            || self.scales.windows(2).any(|w| w[0] <= w[1])
        {
            return Err("--scales must be positive and strictly decreasing".into());
        }
        if !(self.block_tol >= 0.0 && self.block_tol.is_finite()) {
            return Err("--block-tol must be a nonnegative finite number".into());
        }
        if let Some(t) = self.tol_override {
            if !(t >= 0.0 && t.is_finite()) {
                return Err("--tol-override must be a nonnegative finite number".into());
            }
        }
        if let Some(bad) = self.only.iter().find(|name| !is_family(name)) {
            return Err(unknown_check(bad));
        }
        Ok(())
    }

    pub fn grid(&self) -> GridConfig {
        GridConfig {
            n_list: self.n_list.clone(),
            k_max: self.k_max,
            opts: CheckOptions {
                paranoid: self.paranoid,
                block_tol: self.block_tol,
                tol_override: self.tol_override,
                scales: self.scales.clone(),
            },
            part: self.part,
            variant: self.variant,
        }
    }

    fn families(&self) -> Vec<&str> {
        if self.only.is_empty() {
            FAMILIES.to_vec()
        } else {
            FAMILIES
                .iter()
                .copied()
                .filter(|f| self.only.iter().any(|o| o == f))
                .collect()
        }
    }
}

fn unknown_check(name: &str) -> String {
    format!(
        "unknown check {name:?}; valid names: {}",
        FAMILIES.join(", ")
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub suite_version: String,
    pub seed: u64,
    pub checks: Vec<CheckReport>,
    pub all_pass: bool,
}

/// Runs every selected family for the configured number of trials. Trials
/// run in parallel; the output order is by family name, then trial.
pub fn run_reports(config: &SuiteConfig) -> SuiteReport {
    let grid = config.grid();
    let jobs: Vec<(&str, u64)> = match config.trial_seed {
        Some(seed) => config.families().into_iter().map(|f| (f, seed)).collect(),
        None => config
            .families()
            .into_iter()
            .flat_map(|f| (0..config.trials).map(move |i| (f, trial_seed(config.seed, f, i))))
            .collect(),
    };
    let checks: Vec<CheckReport> = jobs
        .par_iter()
        .map(|&(name, seed)| run_trial(name, &grid, seed))
        .collect();
    let all_pass = checks.iter().all(|c| c.pass);
    SuiteReport {
        suite_version: env!("CARGO_PKG_VERSION").to_string(),
        seed: config.seed,
        checks,
        all_pass,
    }
}

fn fmt_order(o: Option<f64>) -> String {
    o.map_or_else(|| "-".to_string(), |v| format!("{v:.3}"))
}

pub fn write_human(report: &SuiteReport, out: &mut dyn Write) -> std::io::Result<()> {
    writeln!(
        out,
        "{:<28} {:>20} {:<6} {:>11} {:>8} {:>10}",
        "check", "seed", "result", "worst", "order", "tolerance"
    )?;
    for c in &report.checks {
        let seed = c
            .params
            .get("seed")
            .and_then(|v| v.as_u64())
            .unwrap_or_default();
        writeln!(
            out,
            "{:<28} {:>20} {:<6} {:>11.3e} {:>8} {:>10.1e}",
            c.name,
            seed,
            if c.pass { "PASS" } else { "FAIL" },
            c.worst_residual(),
            fmt_order(c.order_estimate),
            c.tolerance
        )?;
        if let Some(err) = c.params.get("error").and_then(|v| v.as_str()) {
            writeln!(out, "    error: {err}")?;
        }
    }
    let failed: Vec<&CheckReport> = report.checks.iter().filter(|c| !c.pass).collect();
    if failed.is_empty() {
        writeln!(
            out,
            "all {} reports passed (seed {})",
            report.checks.len(),
            report.seed
        )?;
    } else {
        writeln!(
            out,
            "{} of {} reports failed (seed {}); replay with:",
            failed.len(),
            report.checks.len(),
            report.seed
        )?;
        for c in failed {
            let seed = c
                .params
                .get("seed")
                .and_then(|v| v.as_u64())
                .unwrap_or_default();
            writeln!(out, "    check {} --trial-seed {seed}", c.name)?;
        }
    }
    Ok(())
}

fn write_json(path: &Path, report: &SuiteReport) -> std::io::Result<()> {
    let text = serde_json::to_string_pretty(report).map_err(std::io::Error::other)?;
    std::fs::write(path, text + "\n")
}

/// Runs the suite, prints the table to `out` and writes the JSON report.
pub fn run_suite(config: &SuiteConfig, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    if let Err(msg) = config.validate() {
        let _ = writeln!(err, "error: {msg}");
        return EXIT_CONFIG;
    }
    let report = run_reports(config);
    if let Err(e) = write_human(&report, out) {
        let _ = writeln!(err, "error: {e}");
        return EXIT_CONFIG;
    }
    if let Some(path) = &config.output_path {
        if let Err(e) = write_json(path, &report) {
            let _ = writeln!(err, "error: cannot write {}: {e}", path.display());
            return EXIT_CONFIG;
        }
    }
    if report.all_pass {
        EXIT_PASS
    } else {
        EXIT_FAIL
    }
}

/// Runs a single family. Unknown names are a configuration error.
pub fn run_check(
    name: &str,
    config: &SuiteConfig,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> i32 {
    if !is_family(name) {
        let _ = writeln!(err, "error: {}", unknown_check(name));
        return EXIT_CONFIG;
    }
    if config.part.is_some() && !matches!(name, "check_dec15a" | "check_dec15b") {
        let _ = writeln!(
            err,
            "error: --part applies to check_dec15a and check_dec15b only"
        );
        return EXIT_CONFIG;
    }
    if let Some(part) = config.part {
        let max = if name == "check_dec15a" { 2 } else { 3 };
        if part == 0 || part > max {
            let _ = writeln!(err, "error: {name} has parts 1..={max}");
            return EXIT_CONFIG;
        }
    }
    if config.variant.is_some() && name != "check_jan11" {
        let _ = writeln!(err, "error: --variant applies to check_jan11 only");
        return EXIT_CONFIG;
    }
    let single = SuiteConfig {
        only: vec![name.to_string()],
        ..config.clone()
    };
    let code = run_suite(&single, out, err);
    if code == EXIT_FAIL {
        if let Some(report) = run_reports(&single).checks.into_iter().find(|c| !c.pass) {
            if let Some(inst) = report.instance {
                let _ = writeln!(out, "failing instance: {inst}");
            }
        }
    }
    code
}

pub fn show_tensor(path: &Path, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => {
            let _ = writeln!(err, "error: cannot read {}: {e}", path.display());
            return EXIT_CONFIG;
        }
    };
    let t: DenseTensor = match serde_json::from_str(&text) {
        Ok(t) => t,
        Err(e) => {
            let _ = writeln!(err, "error: {} is not a tensor file: {e}", path.display());
            return EXIT_CONFIG;
        }
    };
    let nonzero: Vec<Vec<usize>> = t.indices().filter(|i| t.get(i) != 0.0).collect();
    let result = (|| -> std::io::Result<()> {
        writeln!(
            out,
            "order {}  dim {}  entries {}  nonzero {}",
            t.order(),
            t.dim(),
            t.len(),
            nonzero.len()
        )?;
        writeln!(
            out,
            "frobenius norm {:.6e}  max |entry| {:.6e}",
            t.frobenius_norm(),
            t.max_abs()
        )?;
        for idx in &nonzero {
            writeln!(out, "{idx:?} {:.17e}", t.get(idx))?;
        }
        Ok(())
    })();
    match result {
        Ok(()) => EXIT_PASS,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_CONFIG
        }
    }
}

fn resolve_seed(explicit: Option<u64>) -> Result<u64, String> {
    if let Some(s) = explicit {
        return Ok(s);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| format!("${SEED_ENV} is not an unsigned integer: {v:?}")),
        Err(_) => Ok(DEFAULT_SEED),
    }
}

fn config_from(common: &CommonArgs, default_trials: usize) -> Result<SuiteConfig, String> {
    Ok(SuiteConfig {
        seed: resolve_seed(common.seed)?,
        n_list: common.n_list.clone(),
        k_max: common.k_max,
        trials: common.trials.unwrap_or(default_trials),
        scales: common
            .scales
            .clone()
            .unwrap_or_else(|| crate::verify::DEFAULT_SCALES.to_vec()),
        block_tol: common.block_tol,
        tol_override: common.tol_override,
        output_path: common.json.clone(),
        paranoid: common.paranoid,
        allow_large_k: common.allow_large_k,
        ..SuiteConfig::default()
    })
}

/// Parses `args` (including the program name) and dispatches.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() {
                EXIT_CONFIG
            } else {
                EXIT_PASS
            };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                write!(err, "{text}")
            } else {
                write!(out, "{text}")
            };
            return code;
        }
    };
    let fail = |err: &mut dyn Write, msg: String| {
        let _ = writeln!(err, "error: {msg}");
        EXIT_CONFIG
    };
    match cli.command {
        Command::Suite {
            action: SuiteAction::Run(args),
        } => match config_from(&args.common, DEFAULT_SUITE_TRIALS) {
            Ok(config) => run_suite(
                &SuiteConfig {
                    only: args.only,
                    ..config
                },
                out,
                err,
            ),
            Err(msg) => fail(err, msg),
        },
        Command::Check(args) => {
            let variant = match args
                .variant
                .as_deref()
                .map(str::parse::<Jan11Variant>)
                .transpose()
            {
                Ok(v) => v,
                Err(e) => return fail(err, e.to_string()),
            };
            match config_from(&args.common, 1) {
                Ok(config) => {
                    let config = SuiteConfig {
                        part: args.part,
                        variant,
                        trial_seed: args.trial_seed,
                        ..config
                    };
                    run_check(&args.name, &config, out, err)
                }
                Err(msg) => fail(err, msg),
            }
        }
        Command::Tensor {
            action: TensorAction::Show { file },
        } => show_tensor(&file, out, err),
    }
}
