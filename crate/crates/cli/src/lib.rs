//! Command-line front end: `simulate`, `limit`, `verify` and `correct`.

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use eulerdisc::correction::{joint_cross_terminal_prob, BarrierQuery};
use eulerdisc::experiment::{emit, run_experiment, ExperimentConfig, ExperimentKind, ExperimentReport, OutputFormat};
use eulerdisc::verify::{run_criterion, CriterionResult, CRITERIA};
use serde::Serialize;

/// Environment variable naming the default output directory.
pub const OUTPUT_ENV: &str = "EULERDISC_OUT";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] eulerdisc::Error),
    #[error("{0}")]
    Usage(String),
    #[error("writing output: {0}")]
    Output(#[from] std::io::Error),
    #[error("serializing output: {0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Core(eulerdisc::Error::Config(_) | eulerdisc::Error::InvalidParameter(_)) => 2,
            _ => 3,
        }
    }
}

/// Exit code when a run finishes but an acceptance threshold fails.
pub const EXIT_THRESHOLD_FAILED: i32 = 1;

#[derive(Debug, Parser)]
#[command(name = "eulerdisc", version, about = "Euler discretization error experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run an error experiment and write its samples and summary.
    Simulate(SimulateArgs),
    /// Draw from a limit law and write the samples and summary.
    Limit(LimitArgs),
    /// Run the acceptance suite.
    Verify(VerifyArgs),
    /// Compare the corrected and uncorrected crossing probabilities with Monte Carlo.
    Correct(CorrectArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Flat `key = value` configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override a configuration key, e.g. `--set n=1024`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    #[arg(long)]
    pub samples: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub shards: Option<u32>,
    /// Output directory.
    #[arg(long, env = OUTPUT_ENV)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Experiment kind, e.g. `hit` or `min_finite`.
    #[arg(long)]
    pub kind: Option<String>,
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum LimitKind {
    Hit,
    Min,
}

#[derive(Debug, Args)]
pub struct LimitArgs {
    #[arg(long, value_enum, default_value = "min")]
    pub kind: LimitKind,
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub eps: Option<f64>,
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Criteria to run, e.g. `1,2,12`. Defaults to all.
    #[arg(long, value_delimiter = ',')]
    pub criteria: Vec<u8>,
    #[arg(long, default_value_t = 1)]
    pub shards: u32,
    /// Directory for `verify.json`.
    #[arg(long, env = OUTPUT_ENV)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CorrectArgs {
    #[arg(long)]
    pub b: f64,
    #[arg(long)]
    pub y: f64,
    #[arg(long, default_value_t = 1.0)]
    pub t: f64,
    #[arg(long)]
    pub n: u32,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub mu: f64,
    #[arg(long, default_value_t = 1.0)]
    pub sigma: f64,
    #[arg(long = "mc-samples", default_value_t = 1_000_000)]
    pub mc_samples: u64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub shards: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

impl From<Format> for OutputFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Csv => OutputFormat::Csv,
            Format::Json => OutputFormat::Json,
        }
    }
}

fn build_config(kind: Option<ExperimentKind>, extra: &[(&str, String)], run: &RunArgs) -> Result<ExperimentConfig, CliError> {
    let mut cfg = ExperimentConfig::default();
    if let Some(path) = &run.config {
        cfg.apply_kv_file(path)?;
    }
    if let Some(kind) = kind {
        cfg.kind = kind;
    }
    for (k, v) in extra {
        cfg.set(k, v)?;
    }
    for o in &run.overrides {
        let (k, v) = o
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("--set expects KEY=VALUE, got '{o}'")))?;
        cfg.set(k, v)?;
    }
    if let Some(v) = run.samples {
        cfg.samples = v;
    }
    if let Some(v) = run.seed {
        cfg.seed = v;
    }
    if let Some(v) = run.shards {
        cfg.shards = v;
    }
    if let Some(v) = &run.output {
        cfg.output = Some(v.clone());
    }
    if let Some(v) = run.format {
        cfg.format = v.into();
    }
    Ok(cfg)
}

#[derive(Serialize)]
struct RunSummary<'a> {
    kind: &'a str,
    passed: bool,
    failures: Vec<&'a eulerdisc::experiment::Check>,
    files: Vec<PathBuf>,
}

fn finish_run(report: &ExperimentReport, out: &mut dyn Write) -> Result<i32, CliError> {
    let cfg = &report.config;
    let mut files = Vec::new();
    if let Some(dir) = &cfg.output {
        let e = emit(report, dir, cfg.format)?;
        files.extend(e.data);
        files.push(e.summary);
    } else {
        writeln!(out, "{}", report.to_json()?)?;
    }
    let summary = RunSummary {
        kind: cfg.kind.name(),
        passed: report.passed(),
        failures: report.failures(),
        files,
    };
    writeln!(out, "{}", serde_json::to_string(&summary)?)?;
    Ok(if report.passed() { 0 } else { EXIT_THRESHOLD_FAILED })
}

#[derive(Serialize)]
struct VerifySummary<'a> {
    passed: bool,
    failed: Vec<u8>,
    results: &'a [CriterionResult],
}

#[derive(Debug, Serialize)]
pub struct CorrectOutput {
    pub uncorrected: f64,
    pub corrected: f64,
    pub mc_estimate: f64,
    pub mc_se: f64,
}

/// Run a parsed command, writing human and JSON output to `out`. Returns the
/// process exit code.
pub fn run(cli: Cli, out: &mut dyn Write) -> Result<i32, CliError> {
    match cli.command {
        Command::Simulate(args) => {
            let kind = args.kind.as_deref().map(str::parse).transpose()?;
            let cfg = build_config(kind, &[], &args.run)?;
            if cfg.kind == ExperimentKind::Correction {
                return Err(CliError::Usage("use `correct` for correction runs".into()));
            }
            let report = run_experiment(&cfg)?;
            finish_run(&report, out)
        }
        Command::Limit(args) => {
            let kind = match args.kind {
                LimitKind::Hit => ExperimentKind::LimitHit,
                LimitKind::Min => ExperimentKind::LimitMin,
            };
            let mut extra = Vec::new();
            if let Some(s) = args.sigma {
                extra.push(("sigma", s.to_string()));
            }
            if let Some(e) = args.eps {
                extra.push(("eps", e.to_string()));
            }
            let cfg = build_config(Some(kind), &extra, &args.run)?;
            let report = run_experiment(&cfg)?;
            finish_run(&report, out)
        }
        Command::Verify(args) => {
            let ids: Vec<u8> = if args.criteria.is_empty() {
                CRITERIA.iter().map(|(i, _)| *i).collect()
            } else {
                args.criteria
            };
            let mut results = Vec::new();
            for id in ids {
                let r = run_criterion(id, args.shards)?;
                writeln!(out, "{}", r.line())?;
                results.push(r);
            }
            let failed: Vec<u8> = results.iter().filter(|r| !r.pass).map(|r| r.id).collect();
            let summary = VerifySummary {
                passed: failed.is_empty(),
                failed: failed.clone(),
                results: &results,
            };
            let json = serde_json::to_string_pretty(&summary)?;
            if let Some(dir) = &args.output {
                std::fs::create_dir_all(dir)?;
                std::fs::write(dir.join("verify.json"), json + "\n")?;
            }
            writeln!(out, "{}", serde_json::json!({ "passed": failed.is_empty(), "failed": failed }))?;
            Ok(if failed.is_empty() { 0 } else { EXIT_THRESHOLD_FAILED })
        }
        Command::Correct(args) => {
            let q = BarrierQuery {
                b: args.b,
                y: args.y,
                t: args.t,
                n: args.n,
                mu: args.mu,
                sigma: args.sigma,
            };
            q.validate()?;
            let mut cfg = ExperimentConfig {
                kind: ExperimentKind::Correction,
                samples: args.mc_samples,
                seed: args.seed,
                shards: args.shards,
                ..ExperimentConfig::default()
            };
            for (k, v) in [("b", q.b), ("y", q.y), ("t", q.t), ("mu", q.mu), ("sigma", q.sigma)] {
                cfg.set(k, &v.to_string())?;
            }
            cfg.n = q.n;
            let c = run_experiment(&cfg)?.correction.expect("correction runs fill this");
            debug_assert_eq!(c.corrected, joint_cross_terminal_prob(&q, false)?);
            let output = CorrectOutput {
                uncorrected: c.uncorrected,
                corrected: c.corrected,
                mc_estimate: c.mc_estimate,
                mc_se: c.mc_se,
            };
            writeln!(out, "{}", serde_json::to_string_pretty(&output)?)?;
            Ok(0)
        }
    }
}
