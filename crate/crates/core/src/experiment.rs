//! Sharded, reproducible experiment runs and their reports.
//!
//! Sample `i` of a run always draws from substream `i` of the run's seed,
//! so the samples (and every summary built from them) do not depend on how
//! the run is split into shards or on the worker count.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{beta_constant, ks_two_sample, ks_vs_uniform, EmpiricalSummary};
use crate::correction::{joint_cross_terminal_prob, mc_discrete_prob, BarrierQuery};
use crate::error::{Error, Result};
use crate::events::{error_triplet_globalmin, error_triplet_hit, error_triplet_min, hit_constant_exact, BmParams};
use crate::limits::{sample_hit_limit, sample_min_limit};
use crate::paths::BarrierSpec;
use crate::rng::Stream;
use crate::walks::{overshoot_pair, running_min_pair, vanishing_drift_pair};

/// Offset between a run's seed and the seed of its reference sample.
const REFERENCE_SEED_SALT: u64 = 0x9e37_79b9_7f4a_7c15;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Hit,
    MinFinite,
    MinInfinite,
    Overshoot,
    RunningMin,
    VanishingDrift,
    LimitHit,
    LimitMin,
    Correction,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 9] = [
        Self::Hit,
        Self::MinFinite,
        Self::MinInfinite,
        Self::Overshoot,
        Self::RunningMin,
        Self::VanishingDrift,
        Self::LimitHit,
        Self::LimitMin,
        Self::Correction,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Hit => "hit",
            Self::MinFinite => "min_finite",
            Self::MinInfinite => "min_infinite",
            Self::Overshoot => "overshoot",
            Self::RunningMin => "running_min",
            Self::VanishingDrift => "vanishing_drift",
            Self::LimitHit => "limit_hit",
            Self::LimitMin => "limit_min",
            Self::Correction => "correction",
        }
    }

    /// CSV column names of the sample dump.
    pub fn columns(self) -> &'static [&'static str] {
        match self {
            Self::Hit | Self::MinFinite | Self::MinInfinite => &["time_err", "pos_err", "frac"],
            Self::Overshoot | Self::RunningMin | Self::VanishingDrift => &["first", "second"],
            Self::LimitHit | Self::LimitMin => &["time_comp", "pos_comp", "u"],
            Self::Correction => &[],
        }
    }

    fn reference(self) -> Option<Reference> {
        match self {
            Self::Hit | Self::Overshoot => Some(Reference::HitLimit),
            Self::MinFinite | Self::MinInfinite | Self::RunningMin | Self::VanishingDrift => Some(Reference::MinLimit),
            _ => None,
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown experiment kind '{s}'")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Csv,
    Json,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BarrierShape {
    Constant,
    Linear,
    Sqrt,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HitMethod {
    /// Event-driven sampler, constant barriers only, no horizon.
    Exact,
    /// Mesh path on `[0, horizon]` with a bisected continuous crossing.
    Path,
}

/// Flat experiment configuration. See [`ExperimentConfig::set`] for keys.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub n: u32,
    pub a: f64,
    pub mu: f64,
    pub sigma: f64,
    pub m: f64,
    pub nu: f64,
    pub eps: f64,
    pub depth: u32,
    pub b: f64,
    pub barrier: BarrierShape,
    pub barrier_rate: f64,
    pub method: HitMethod,
    pub horizon: f64,
    pub y: f64,
    pub t: f64,
    pub samples: u64,
    pub seed: u64,
    pub shards: u32,
    pub output: Option<PathBuf>,
    pub format: OutputFormat,
    /// Fail the run if any KS distance exceeds this.
    pub max_ks: Option<f64>,
    /// Fail the run if the position mean is further than this from beta.
    pub mean_tol: Option<f64>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            kind: ExperimentKind::LimitMin,
            n: 4096,
            a: 1.0,
            mu: 0.0,
            sigma: 1.0,
            m: 50.0,
            nu: 1.0 / 64.0,
            eps: 1e-6,
            depth: 14,
            b: 1.0,
            barrier: BarrierShape::Constant,
            barrier_rate: 0.0,
            method: HitMethod::Exact,
            horizon: 10.0,
            y: 0.0,
            t: 1.0,
            samples: 10_000,
            seed: 1,
            shards: 1,
            output: None,
            format: OutputFormat::Csv,
            max_ks: None,
            mean_tol: None,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("bad value '{value}' for key '{key}'")))
}

impl ExperimentConfig {
    /// Set one key. Keys: `kind n a mu sigma m nu eps depth b barrier
    /// barrier_rate method horizon y t samples seed shards output format
    /// max_ks mean_tol`.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key.trim() {
            "kind" => self.kind = value.parse()?,
            "n" => self.n = parse(key, value)?,
            "a" => self.a = parse(key, value)?,
            "mu" => self.mu = parse(key, value)?,
            "sigma" => self.sigma = parse(key, value)?,
            "m" => self.m = parse(key, value)?,
            "nu" => self.nu = parse(key, value)?,
            "eps" => self.eps = parse(key, value)?,
            "depth" => self.depth = parse(key, value)?,
            "b" => self.b = parse(key, value)?,
            "barrier" => {
                self.barrier = match value {
                    "constant" => BarrierShape::Constant,
                    "linear" => BarrierShape::Linear,
                    "sqrt" => BarrierShape::Sqrt,
                    _ => return Err(Error::Config(format!("unknown barrier shape '{value}'"))),
                }
            }
            "barrier_rate" => self.barrier_rate = parse(key, value)?,
            "method" => {
                self.method = match value {
                    "exact" => HitMethod::Exact,
                    "path" => HitMethod::Path,
                    _ => return Err(Error::Config(format!("unknown hit method '{value}'"))),
                }
            }
            "horizon" => self.horizon = parse(key, value)?,
            "y" => self.y = parse(key, value)?,
            "t" => self.t = parse(key, value)?,
            "samples" => self.samples = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "shards" => self.shards = parse(key, value)?,
            "output" => self.output = Some(PathBuf::from(value)),
            "format" => {
                self.format = match value {
                    "csv" => OutputFormat::Csv,
                    "json" => OutputFormat::Json,
                    _ => return Err(Error::Config(format!("unknown format '{value}'"))),
                }
            }
            "max_ks" => self.max_ks = Some(parse(key, value)?),
            "mean_tol" => self.mean_tol = Some(parse(key, value)?),
            other => return Err(Error::Config(format!("unknown key '{other}'"))),
        }
        Ok(())
    }

    /// Parse `key = value` lines; blank lines and `#` comments are skipped.
    pub fn from_kv_str(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply_kv_str(text)?;
        Ok(cfg)
    }

    pub fn apply_kv_str(&mut self, text: &str) -> Result<()> {
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value, got '{line}'", i + 1)))?;
            self.set(k, v)
                .map_err(|e| Error::Config(format!("line {}: {}", i + 1, strip_prefix(&e))))?;
        }
        Ok(())
    }

    pub fn apply_kv_file(&mut self, path: &Path) -> Result<()> {
        let text = fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        self.apply_kv_str(&text)
    }

    fn params(&self) -> BmParams {
        BmParams {
            mu: self.mu,
            sigma: self.sigma,
        }
    }

    fn barrier_spec(&self) -> Result<BarrierSpec> {
        match self.barrier {
            BarrierShape::Constant => BarrierSpec::constant(self.b),
            BarrierShape::Linear => BarrierSpec::linear(self.b, self.barrier_rate),
            BarrierShape::Sqrt => BarrierSpec::sqrt_growth(self.b, self.barrier_rate),
        }
    }

    fn correction_query(&self) -> BarrierQuery {
        BarrierQuery {
            b: self.b,
            y: self.y,
            t: self.t,
            n: self.n,
            mu: self.mu,
            sigma: self.sigma,
        }
    }

    /// Check every parameter constraint of the selected experiment.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.samples == 0 {
            return bad("samples must be >= 1".into());
        }
        if self.shards == 0 {
            return bad("shards must be >= 1".into());
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return bad(format!("sigma must be > 0, got {}", self.sigma));
        }
        if self.n == 0 {
            return bad("n must be >= 1".into());
        }
        let needs_eps = matches!(
            self.kind,
            ExperimentKind::MinInfinite | ExperimentKind::VanishingDrift | ExperimentKind::LimitMin
        );
        if needs_eps && !(self.eps > 0.0 && self.eps < 1.0) {
            return bad(format!("eps must be in (0,1), got {}", self.eps));
        }
        match self.kind {
            ExperimentKind::Hit => {
                self.barrier_spec().map_err(config)?;
                match self.method {
                    HitMethod::Exact => {
                        if self.barrier != BarrierShape::Constant {
                            return bad("method = exact needs barrier = constant".into());
                        }
                        if self.mu < 0.0 {
                            return bad(format!("hit experiments need mu >= 0, got {}", self.mu));
                        }
                    }
                    HitMethod::Path => {
                        if !(self.horizon > 0.0) || self.horizon * self.n as f64 > 1e9 {
                            return bad(format!("horizon {} out of range for n = {}", self.horizon, self.n));
                        }
                        if self.depth > 40 {
                            return bad(format!("depth {} is too large", self.depth));
                        }
                    }
                }
            }
            ExperimentKind::MinFinite => {
                if !(self.a > 0.0 && self.a * self.n as f64 >= 1.0) {
                    return bad(format!("need a > 0 and n a >= 1, got a = {}", self.a));
                }
            }
            ExperimentKind::MinInfinite if !(self.mu > 0.0) => {
                return bad(format!("min_infinite needs mu > 0, got {}", self.mu));
            }
            ExperimentKind::Overshoot => {
                if !(self.m > 0.0) {
                    return bad(format!("level m must be > 0, got {}", self.m));
                }
                if self.nu < 0.0 {
                    return bad(format!("overshoot needs nu >= 0, got {}", self.nu));
                }
            }
            ExperimentKind::VanishingDrift if !(self.nu > 0.0) => {
                return bad(format!("vanishing_drift needs nu > 0, got {}", self.nu));
            }
            ExperimentKind::Correction => self.correction_query().validate().map_err(config)?,
            _ => {}
        }
        Ok(())
    }
}

fn strip_prefix(e: &Error) -> String {
    match e {
        Error::Config(m) | Error::InvalidParameter(m) => m.clone(),
        other => other.to_string(),
    }
}

fn config(e: Error) -> Error {
    Error::Config(strip_prefix(&e))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Reference {
    HitLimit,
    MinLimit,
}

/// Run `f` on substreams `0..count` of `seed`, split into `shards`
/// contiguous blocks processed in parallel. Returns the kept values in
/// sample order and the number of `None` results.
pub fn sample_sharded<T, F>(seed: u64, count: u64, shards: u32, f: F) -> Result<(Vec<T>, u64)>
where
    T: Send,
    F: Fn(&mut Stream) -> Result<Option<T>> + Sync,
{
    let shards = shards.max(1) as u64;
    let bounds: Vec<(u64, u64)> = (0..shards)
        .map(|i| (count * i / shards, count * (i + 1) / shards))
        .filter(|(lo, hi)| hi > lo)
        .collect();
    let blocks: Vec<Result<(Vec<T>, u64)>> = bounds
        .par_iter()
        .map(|&(lo, hi)| {
            let mut s = Stream::new(seed, lo);
            let mut kept = Vec::with_capacity((hi - lo) as usize);
            let mut dropped = 0;
            for _ in lo..hi {
                let next = s.next_shard();
                match f(&mut s)? {
                    Some(v) => kept.push(v),
                    None => dropped += 1,
                }
                s = next;
            }
            Ok((kept, dropped))
        })
        .collect();
    let mut out = Vec::with_capacity(count as usize);
    let mut dropped = 0;
    for block in blocks {
        let (kept, d) = block?;
        out.extend(kept);
        dropped += d;
    }
    Ok((out, dropped))
}

/// One acceptance check inside a report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub pass: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrectionOutcome {
    pub uncorrected: f64,
    pub corrected: f64,
    pub mc_estimate: f64,
    pub mc_se: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub attempted: u64,
    pub discarded: u64,
    /// Per-column summaries, keyed by CSV column name.
    pub components: BTreeMap<String, EmpiricalSummary>,
    /// Columns whose population mean is infinite; their sample means are
    /// reported but do not converge.
    pub heavy_tailed: Vec<String>,
    pub reference: Option<String>,
    pub beta: f64,
    pub correction: Option<CorrectionOutcome>,
    pub checks: Vec<Check>,
    #[serde(skip)]
    pub columns: Vec<Vec<f64>>,
    #[serde(skip)]
    pub wall_time: Duration,
}

impl ExperimentReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn failures(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.pass).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Internal(format!("serializing report: {e}")))
    }
}

fn sample_row(cfg: &ExperimentConfig, barrier: Option<&BarrierSpec>, s: &mut Stream) -> Result<Option<Vec<f64>>> {
    let triplet = |t: crate::events::ErrorTriplet| vec![t.time_err, t.pos_err, t.frac];
    let pair = |p: (f64, f64)| vec![p.0, p.1];
    let limit = |t: crate::limits::LimitTriplet| vec![t.time_comp, t.pos_comp, t.u];
    Ok(Some(match cfg.kind {
        ExperimentKind::Hit => match cfg.method {
            HitMethod::Exact => triplet(hit_constant_exact(cfg.n, cfg.b, cfg.params(), s)?.1),
            HitMethod::Path => {
                let b = barrier.expect("barrier built for hit runs");
                match error_triplet_hit(cfg.n, b, cfg.params(), cfg.horizon, cfg.depth, s)? {
                    Some((_, t)) => triplet(t),
                    None => return Ok(None),
                }
            }
        },
        ExperimentKind::MinFinite => triplet(error_triplet_min(cfg.a, cfg.n, cfg.params(), s)?),
        ExperimentKind::MinInfinite => triplet(error_triplet_globalmin(cfg.mu, cfg.sigma, cfg.n, cfg.eps, s)?),
        ExperimentKind::Overshoot => pair(overshoot_pair(cfg.m, cfg.sigma, cfg.nu, s)?),
        ExperimentKind::RunningMin => pair(running_min_pair(cfg.n, cfg.sigma, s)?),
        ExperimentKind::VanishingDrift => pair(vanishing_drift_pair(cfg.nu, cfg.sigma, cfg.eps, s)?),
        ExperimentKind::LimitHit => limit(sample_hit_limit(cfg.sigma, s)?),
        ExperimentKind::LimitMin => limit(sample_min_limit(cfg.sigma, cfg.eps, s)?),
        ExperimentKind::Correction => unreachable!("correction runs are not row-sampled"),
    }))
}

fn transpose(rows: Vec<Vec<f64>>, width: usize) -> Vec<Vec<f64>> {
    let mut cols = vec![Vec::with_capacity(rows.len()); width];
    for r in rows {
        for (c, v) in cols.iter_mut().zip(r) {
            c.push(v);
        }
    }
    cols
}

/// Execute an experiment. Deterministic in `(config, seed)`; the shard
/// count only changes the work split.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let start = Instant::now();
    let mut report = ExperimentReport {
        config: cfg.clone(),
        attempted: cfg.samples,
        discarded: 0,
        components: BTreeMap::new(),
        heavy_tailed: Vec::new(),
        reference: None,
        beta: beta_constant(),
        correction: None,
        checks: Vec::new(),
        columns: Vec::new(),
        wall_time: Duration::ZERO,
    };

    if cfg.kind == ExperimentKind::Correction {
        let q = cfg.correction_query();
        let (hits, _) = sample_sharded(cfg.seed, cfg.samples, cfg.shards, |s| {
            Ok(Some(mc_discrete_prob(&q, 1, s)?.estimate == 1.0))
        })?;
        let total = hits.len();
        let hits = hits.into_iter().filter(|&h| h).count();
        let p = hits as f64 / total as f64;
        report.correction = Some(CorrectionOutcome {
            uncorrected: joint_cross_terminal_prob(&q, true)?,
            corrected: joint_cross_terminal_prob(&q, false)?,
            mc_estimate: p,
            mc_se: (p * (1.0 - p) / total as f64).sqrt(),
        });
        report.wall_time = start.elapsed();
        return Ok(report);
    }

    let barrier = if cfg.kind == ExperimentKind::Hit {
        Some(cfg.barrier_spec()?)
    } else {
        None
    };
    let (rows, discarded) = sample_sharded(cfg.seed, cfg.samples, cfg.shards, |s| sample_row(cfg, barrier.as_ref(), s))?;
    report.discarded = discarded;
    let names = cfg.kind.columns();
    if rows.is_empty() {
        return Err(Error::Internal(format!("all {} samples were discarded", cfg.samples)));
    }
    let columns = transpose(rows, names.len());

    for (name, col) in names.iter().zip(&columns) {
        report.components.insert(name.to_string(), EmpiricalSummary::from_samples(col)?);
    }
    // Time-type columns have infinite-mean limit laws.
    report.heavy_tailed = names
        .iter()
        .filter(|n| matches!(**n, "time_err" | "first" | "time_comp"))
        .map(|n| n.to_string())
        .collect();

    if let Some(reference) = cfg.kind.reference() {
        let ref_seed = cfg.seed.wrapping_add(REFERENCE_SEED_SALT);
        let (ref_rows, _) = sample_sharded(ref_seed, cfg.samples, cfg.shards, |s| {
            let t = match reference {
                Reference::HitLimit => sample_hit_limit(cfg.sigma, s)?,
                Reference::MinLimit => sample_min_limit(cfg.sigma, cfg.eps.min(1e-4), s)?,
            };
            Ok(Some([t.time_comp, t.pos_comp]))
        })?;
        let ref_time: Vec<f64> = ref_rows.iter().map(|r| r[0]).collect();
        let ref_pos: Vec<f64> = ref_rows.iter().map(|r| r[1]).collect();
        report.reference = Some(
            match reference {
                Reference::HitLimit => "limit_hit",
                Reference::MinLimit => "limit_min",
            }
            .into(),
        );
        for (i, r) in [&ref_time, &ref_pos].into_iter().enumerate() {
            let ks = ks_two_sample(&columns[i], r)?;
            let name = names[i];
            let summary = report.components.get_mut(name).expect("inserted above");
            *summary = summary.clone().with_ks(ks);
        }
    }
    if names.len() == 3 {
        let ks = ks_vs_uniform(&columns[2])?;
        let summary = report.components.get_mut(names[2]).expect("inserted above");
        *summary = summary.clone().with_ks(ks);
    }

    if let Some(max_ks) = cfg.max_ks {
        for (name, s) in &report.components {
            if let Some(ks) = s.ks {
                report.checks.push(Check {
                    name: format!("ks:{name}"),
                    value: ks,
                    threshold: max_ks,
                    pass: ks < max_ks,
                });
            }
        }
    }
    if let Some(tol) = cfg.mean_tol {
        let pos_name = names[1];
        let mean = report.components[pos_name].mean / cfg.sigma;
        let err = (mean - beta_constant()).abs();
        report.checks.push(Check {
            name: format!("mean:{pos_name}"),
            value: err,
            threshold: tol,
            pass: err < tol,
        });
    }

    report.columns = columns;
    report.wall_time = start.elapsed();
    Ok(report)
}

/// Files written by [`emit`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Emitted {
    pub data: Option<PathBuf>,
    pub summary: PathBuf,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Write the report into `dir`: `<kind>.csv` (samples, csv format only)
/// and `<kind>.json` (summary and config echo). Nothing is written outside
/// `dir`.
pub fn emit(report: &ExperimentReport, dir: &Path, format: OutputFormat) -> Result<Emitted> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let stem = report.config.kind.name();
    let names = report.config.kind.columns();
    let data = if format == OutputFormat::Csv && !names.is_empty() {
        let path = dir.join(format!("{stem}.csv"));
        let file = File::create(&path).map_err(io_err(&path))?;
        write_columns_csv(BufWriter::new(file), names, &report.columns).map_err(io_err(&path))?;
        Some(path)
    } else {
        None
    };
    let summary = dir.join(format!("{stem}.json"));
    fs::write(&summary, report.to_json()? + "\n").map_err(io_err(&summary))?;
    Ok(Emitted { data, summary })
}

/// CSV with a header row and 17 significant digits per value.
pub fn write_columns_csv<W: Write>(mut w: W, names: &[&str], columns: &[Vec<f64>]) -> std::io::Result<()> {
    writeln!(w, "{}", names.join(","))?;
    let rows = columns.first().map_or(0, Vec::len);
    for i in 0..rows {
        for (j, c) in columns.iter().enumerate() {
            if j > 0 {
                w.write_all(b",")?;
            }
            write!(w, "{:.16e}", c[i])?;
        }
        w.write_all(b"\n")?;
    }
    w.flush()
}

/// Read a CSV written by [`write_columns_csv`]: header names and columns.
pub fn read_columns_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut lines = BufReader::new(file).lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Config(format!("{}: empty CSV", path.display())))?
        .map_err(io_err(path))?;
    let names: Vec<String> = header.split(',').map(str::to_string).collect();
    let mut columns = vec![Vec::new(); names.len()];
    for (i, line) in lines.enumerate() {
        let line = line.map_err(io_err(path))?;
        let mut fields = line.split(',');
        for c in columns.iter_mut() {
            let v = fields
                .next()
                .and_then(|f| f.parse().ok())
                .ok_or_else(|| Error::Config(format!("{}: bad row {}", path.display(), i + 2)))?;
            c.push(v);
        }
    }
    Ok((names, columns))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(text: &str) -> ExperimentConfig {
        ExperimentConfig::from_kv_str(text).unwrap()
    }

    #[test]
    fn parses_key_values() {
        let c = cfg("kind = hit\n# comment\nn=64\nsigma = 2 # trailing\nformat=json\nmax_ks=0.1\n");
        assert_eq!(c.kind, ExperimentKind::Hit);
        assert_eq!(c.n, 64);
        assert_eq!(c.sigma, 2.0);
        assert_eq!(c.format, OutputFormat::Json);
        assert_eq!(c.max_ks, Some(0.1));
    }

    #[test]
    fn reports_bad_lines() {
        let e = ExperimentConfig::from_kv_str("n = 4\nfoo = 1\n").unwrap_err().to_string();
        assert!(e.contains("line 2") && e.contains("foo"), "{e}");
        assert!(ExperimentConfig::from_kv_str("n = x").is_err());
        assert!(ExperimentConfig::from_kv_str("kind = nope").is_err());
        assert!(ExperimentConfig::from_kv_str("just text").is_err());
    }

    #[test]
    fn validation_catches_module_constraints() {
        for text in [
            "kind = min_infinite\nmu = 0",
            "kind = vanishing_drift\nnu = 0",
            "kind = limit_min\neps = 1",
            "kind = hit\nmu = -1",
            "kind = hit\nbarrier = linear\nbarrier_rate = 1",
            "kind = correction\ny = 3\nb = 2",
            "sigma = 0",
            "samples = 0",
        ] {
            let c = cfg(text);
            assert!(matches!(run_experiment(&c), Err(Error::Config(_))), "{text}");
        }
    }

    #[test]
    fn same_config_same_report() {
        let c = cfg("kind = limit_hit\nsamples = 2000\nseed = 3");
        let a = run_experiment(&c).unwrap().to_json().unwrap();
        let b = run_experiment(&c).unwrap().to_json().unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn shard_count_does_not_change_results() {
        for kind in ["limit_min", "overshoot", "min_finite", "hit"] {
            let text = format!("kind = {kind}\nsamples = 997\nn = 64\nm = 5\nseed = 11");
            let one = run_experiment(&cfg(&text)).unwrap();
            let eight = run_experiment(&cfg(&format!("{text}\nshards = 8"))).unwrap();
            assert_eq!(one.components, eight.components, "{kind}");
            assert_eq!(one.columns, eight.columns);
        }
    }

    #[test]
    fn limit_min_mean_near_beta() {
        let r = run_experiment(&cfg("kind = limit_min\nsamples = 10000\nmean_tol = 0.05")).unwrap();
        assert!(r.passed(), "{:?}", r.checks);
        assert!((r.components["pos_comp"].mean - beta_constant()).abs() < 0.05);
    }

    #[test]
    fn references_and_uniform_ks_are_attached() {
        let r = run_experiment(&cfg("kind = hit\nsamples = 2000\nn = 256")).unwrap();
        assert_eq!(r.reference.as_deref(), Some("limit_hit"));
        for c in ["time_err", "pos_err", "frac"] {
            assert!(r.components[c].ks.is_some(), "{c}");
        }
        assert_eq!(r.heavy_tailed, vec!["time_err".to_string()]);
    }

    #[test]
    fn failing_threshold_is_reported() {
        let r = run_experiment(&cfg("kind = overshoot\nm = 2\nsamples = 500\nmax_ks = 0.0")).unwrap();
        assert!(!r.passed());
        assert!(!r.failures().is_empty());
    }

    #[test]
    fn path_hits_count_discards() {
        let r = run_experiment(&cfg("kind = hit\nmethod = path\nb = 1\nhorizon = 1\nn = 16\ndepth = 8\nsamples = 300"))
            .unwrap();
        assert!(r.discarded > 0);
        assert_eq!(r.attempted, 300);
        assert_eq!(r.components["pos_err"].count as u64, 300 - r.discarded);
        let none = run_experiment(&cfg("kind = hit\nmethod = path\nb = 3\nhorizon = 0.5\nn = 16\nsamples = 50"));
        assert!(none.is_err());
    }

    #[test]
    fn correction_report() {
        let r = run_experiment(&cfg("kind = correction\nb = 2\ny = 1.9\nn = 50\nsamples = 20000\nshards = 3")).unwrap();
        let c = r.correction.unwrap();
        assert!(c.corrected < c.uncorrected);
        assert!(c.mc_se > 0.0);
    }

    #[test]
    fn csv_round_trip_reproduces_summary() {
        let dir = std::env::temp_dir().join(format!("eulerdisc-exp-{}", std::process::id()));
        let r = run_experiment(&cfg("kind = min_finite\nn = 32\nsamples = 500")).unwrap();
        let out = emit(&r, &dir, OutputFormat::Csv).unwrap();
        let (names, cols) = read_columns_csv(out.data.as_ref().unwrap()).unwrap();
        assert_eq!(names, vec!["time_err", "pos_err", "frac"]);
        for (name, col) in names.iter().zip(&cols) {
            let again = EmpiricalSummary::from_samples(col).unwrap();
            let orig = &r.components[name];
            assert_eq!(again.mean, orig.mean);
            assert_eq!(again.quantiles(), orig.quantiles());
        }
        let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(&out.summary).unwrap()).unwrap();
        assert_eq!(json["config"]["kind"], "min_finite");
        fs::remove_dir_all(&dir).unwrap();
    }
}
