//! Run configuration, seeded ensemble runs and report generation.
//!
//! A configuration document holds one `key = value` pair per line; `#`
//! starts a comment. Omitted keys take their defaults:
//!
//! | key               | default      | meaning                                    |
//! |-------------------|--------------|--------------------------------------------|
//! | `kind`            | `v`          | `v`, `lambda`, `cascade_weak_up`, `cascade_weak_down` |
//! | `lasers`          | `both`       | `both`, `strong_only`, `weak_only`         |
//! | `k_strong_absorb` | `1.0`        | strong absorption rate                     |
//! | `k_strong_emit`   | `1.0`        | strong emission rate                       |
//! | `k_weak_absorb`   | `0.001`      | weak absorption rate                       |
//! | `k_weak_emit`     | `0.001`      | weak emission rate                         |
//! | `mode`            | `nurules`    | `nurules`, `original_with_observer`, `original_no_observer` |
//! | `duration`        | `2e6`        | simulated time per trajectory              |
//! | `dt_max`          | `0.01`       | finest step when locating a hit            |
//! | `macro_dt`        | `64 dt_max`  | step while no hit is due                   |
//! | `depth`           | `2`          | cycles per track in a fresh epoch graph    |
//! | `master_seed`     | `0`          | seed of the whole ensemble                 |
//! | `trajectories`    | `1`          | ensemble size                              |
//! | `threshold_gap`   | `auto`       | dark-gap threshold; `auto` is 20 strong cycles |
//! | `out_dir`         | `shelving-out` | directory for logs and reports           |
//!
//! A run writes `trajectory_<index>.tsv` per trajectory plus `report.txt`
//! and `report.jsonl` into `out_dir`.

use std::fmt::{self, Write as _};
use std::fs;
use std::io::{self, BufWriter};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use crate::analysis::{
    classify_weak_timing, default_threshold_gap, interval_stats, segment_telegraph, TimingWindows, WeakTiming,
};
use crate::configurations::{ConfigKind, Lasers, LevelScheme};
use crate::dynamics::RateSet;
use crate::error::Error;
use crate::log::EventLog;
use crate::simulate::{SimOptions, Trajectory};
use crate::state::Mode;

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    /// 1-based line of the offending entry; 0 for command-line overrides.
    pub line: usize,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.line == 0 {
            write!(f, "command line: {}", self.message)
        } else {
            write!(f, "line {}: {}", self.line, self.message)
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ThresholdGap {
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub kind: ConfigKind,
    pub rates: RateSet,
    pub mode: Mode,
    pub duration: f64,
    pub dt_max: f64,
    pub macro_dt: Option<f64>,
    pub depth: u32,
    pub master_seed: u64,
    pub trajectories: u64,
    pub threshold_gap: ThresholdGap,
    pub out_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            kind: ConfigKind::both(LevelScheme::V),
            rates: RateSet::default(),
            mode: Mode::NuRules,
            duration: 2e6,
            dt_max: 0.01,
            macro_dt: None,
            depth: 2,
            master_seed: 0,
            trajectories: 1,
            threshold_gap: ThresholdGap::Auto,
            out_dir: PathBuf::from("shelving-out"),
        }
    }
}

fn positive(key: &str, value: &str) -> Result<f64, String> {
    let x: f64 = value
        .parse()
        .map_err(|_| format!("`{key}` expects a number, got `{value}`"))?;
    if x > 0.0 && x.is_finite() {
        Ok(x)
    } else {
        Err(format!("`{key}` must be positive and finite, got {value}"))
    }
}

fn count(key: &str, value: &str) -> Result<u64, String> {
    let n: u64 = value
        .parse()
        .map_err(|_| format!("`{key}` expects a non-negative integer, got `{value}`"))?;
    Ok(n)
}

impl RunConfig {
    /// Sets one key from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        match key {
            "kind" => self.kind.scheme = value.parse()?,
            "lasers" => self.kind.lasers = value.parse()?,
            "k_strong_absorb" => self.rates.strong_absorb = positive(key, value)?,
            "k_strong_emit" => self.rates.strong_emit = positive(key, value)?,
            "k_weak_absorb" => self.rates.weak_absorb = positive(key, value)?,
            "k_weak_emit" => self.rates.weak_emit = positive(key, value)?,
            "mode" => self.mode = value.parse()?,
            "duration" => self.duration = positive(key, value)?,
            "dt_max" => self.dt_max = positive(key, value)?,
            "macro_dt" => self.macro_dt = Some(positive(key, value)?),
            "depth" => {
                let d = count(key, value)?;
                if d < 1 || d > u32::MAX as u64 {
                    return Err(format!("`depth` must be at least 1, got {value}"));
                }
                self.depth = d as u32;
            }
            "master_seed" => self.master_seed = count(key, value)?,
            "trajectories" => {
                let n = count(key, value)?;
                if n < 1 {
                    return Err("`trajectories` must be at least 1".into());
                }
                self.trajectories = n;
            }
            "threshold_gap" => {
                self.threshold_gap = if value == "auto" {
                    ThresholdGap::Auto
                } else {
                    ThresholdGap::Fixed(positive(key, value)?)
                }
            }
            "out_dir" => {
                if value.is_empty() {
                    return Err("`out_dir` must not be empty".into());
                }
                self.out_dir = PathBuf::from(value);
            }
            other => return Err(format!("unknown key `{other}`")),
        }
        Ok(())
    }

    /// Checks the constraints that involve more than one key.
    pub fn validate(&self) -> Result<(), String> {
        if self.macro_dt() < self.dt_max {
            return Err(format!(
                "`macro_dt` ({}) must not be smaller than `dt_max` ({})",
                self.macro_dt(),
                self.dt_max
            ));
        }
        Ok(())
    }

    pub fn macro_dt(&self) -> f64 {
        self.macro_dt.unwrap_or(64.0 * self.dt_max)
    }

    pub fn threshold_gap(&self) -> f64 {
        match self.threshold_gap {
            ThresholdGap::Auto => default_threshold_gap(&self.rates),
            ThresholdGap::Fixed(x) => x,
        }
    }

    pub fn sim_options(&self) -> SimOptions {
        SimOptions {
            kind: self.kind,
            rates: self.rates,
            mode: self.mode,
            depth: self.depth,
            dt_max: self.dt_max,
            macro_dt: self.macro_dt(),
            ..SimOptions::new(self.kind)
        }
    }
}

pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let mut config = RunConfig::default();
    let mut last_line = 0;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content.split_once('=').ok_or_else(|| ConfigError {
            line,
            message: format!("expected `key = value`, got `{content}`"),
        })?;
        config
            .set(key.trim(), value.trim())
            .map_err(|message| ConfigError { line, message })?;
        last_line = line;
    }
    config
        .validate()
        .map_err(|message| ConfigError { line: last_line, message })?;
    Ok(config)
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("{0}")]
    Config(#[from] ConfigError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error(transparent)]
    Sim(#[from] Error),
}

impl RunError {
    /// Process exit status: 1 for configuration and I/O problems, 2 for a
    /// runtime invariant breach.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Sim(Error::InvariantBreach(_)) => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct TimingTally {
    pub at_start: usize,
    pub at_end: usize,
    pub ambiguous: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryReport {
    pub index: u64,
    pub hits: usize,
    pub bright_intervals: usize,
    pub dark_intervals: usize,
    /// Dark intervals per hit.
    pub dark_entry_frequency: f64,
    pub bright_mean: f64,
    pub bright_std_dev: f64,
    pub dark_mean: f64,
    pub dark_std_dev: f64,
    pub dark_rate: Option<f64>,
    pub timing: Option<TimingTally>,
    pub steps: u64,
    pub max_mass_drift: f64,
    /// max |dm/dt| at the end of the run.
    pub final_mass_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AggregateReport {
    pub trajectories: u64,
    pub hits: usize,
    pub dark_intervals: usize,
    pub dark_entry_frequency: f64,
    pub dark_mean: f64,
    pub timing: Option<TimingTally>,
    pub max_mass_drift: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub config: RunConfig,
    pub trajectories: Vec<TrajectoryReport>,
    pub aggregate: AggregateReport,
}

fn frequency(dark: usize, hits: usize) -> f64 {
    if hits == 0 {
        0.0
    } else {
        dark as f64 / hits as f64
    }
}

/// Summarizes one finished trajectory.
pub fn summarize(config: &RunConfig, index: u64, traj: &Trajectory) -> Result<TrajectoryReport, Error> {
    let log = traj.log();
    let hits = log.hits().count();
    let seg = segment_telegraph(log, config.threshold_gap())?;
    let stats = interval_stats(&seg);
    let timing = if config.kind.lasers == Lasers::Both && hits > 0 {
        let report = classify_weak_timing(log, &seg, config.kind, TimingWindows::from_rates(&config.rates))?;
        Some(TimingTally {
            at_start: report.count(WeakTiming::AtStart),
            at_end: report.count(WeakTiming::AtEnd),
            ambiguous: report.count(WeakTiming::Ambiguous),
        })
    } else {
        None
    };
    Ok(TrajectoryReport {
        index,
        hits,
        bright_intervals: stats.bright.count,
        dark_intervals: stats.dark.count,
        dark_entry_frequency: frequency(stats.dark.count, hits),
        bright_mean: stats.bright.mean,
        bright_std_dev: stats.bright.std_dev,
        dark_mean: stats.dark.mean,
        dark_std_dev: stats.dark.std_dev,
        dark_rate: stats.dark_rate,
        timing,
        steps: traj.steps(),
        max_mass_drift: traj.max_mass_drift(),
        final_mass_rate: traj.max_mass_rate(),
    })
}

fn aggregate(config: &RunConfig, reports: &[TrajectoryReport]) -> AggregateReport {
    let hits = reports.iter().map(|r| r.hits).sum();
    let dark_intervals: usize = reports.iter().map(|r| r.dark_intervals).sum();
    let dark_total: f64 = reports.iter().map(|r| r.dark_mean * r.dark_intervals as f64).sum();
    let timing = reports.iter().try_fold(TimingTally::default(), |acc, r| {
        r.timing.map(|t| TimingTally {
            at_start: acc.at_start + t.at_start,
            at_end: acc.at_end + t.at_end,
            ambiguous: acc.ambiguous + t.ambiguous,
        })
    });
    AggregateReport {
        trajectories: config.trajectories,
        hits,
        dark_intervals,
        dark_entry_frequency: frequency(dark_intervals, hits),
        dark_mean: if dark_intervals > 0 {
            dark_total / dark_intervals as f64
        } else {
            0.0
        },
        timing,
        max_mass_drift: reports.iter().map(|r| r.max_mass_drift).fold(0.0, f64::max),
    }
}

/// Runs the whole ensemble in memory and returns every log with the report.
pub fn simulate(config: &RunConfig) -> Result<(Vec<EventLog>, RunReport), RunError> {
    config.validate().map_err(|message| ConfigError { line: 0, message })?;
    let opts = config.sim_options();
    opts.validate()?;
    let results: Vec<(EventLog, TrajectoryReport)> = (0..config.trajectories)
        .into_par_iter()
        .map(|i| {
            let mut traj = Trajectory::seeded(opts, config.master_seed, i)?;
            traj.run_until(config.duration)?;
            let report = summarize(config, i, &traj)?;
            Ok((traj.into_log(), report))
        })
        .collect::<Result<_, Error>>()?;
    let (logs, trajectories): (Vec<_>, Vec<_>) = results.into_iter().unzip();
    let aggregate = aggregate(config, &trajectories);
    Ok((
        logs,
        RunReport {
            config: config.clone(),
            trajectories,
            aggregate,
        },
    ))
}

/// Runs the ensemble and writes logs and reports into `config.out_dir`.
pub fn run(config: &RunConfig) -> Result<RunReport, RunError> {
    let (logs, report) = simulate(config)?;
    let dir = &config.out_dir;
    fs::create_dir_all(dir).map_err(|source| RunError::Io {
        path: dir.clone(),
        source,
    })?;
    for (i, log) in logs.iter().enumerate() {
        let path = dir.join(format!("trajectory_{i}.tsv"));
        write_file(&path, |w| log.write_tsv(w))?;
    }
    let text = report_text(&report);
    write_file(&dir.join("report.txt"), |w| io::Write::write_all(w, text.as_bytes()))?;
    let jsonl = report_jsonl(&report);
    write_file(&dir.join("report.jsonl"), |w| io::Write::write_all(w, jsonl.as_bytes()))?;
    Ok(report)
}

fn write_file(path: &Path, body: impl FnOnce(&mut BufWriter<fs::File>) -> io::Result<()>) -> Result<(), RunError> {
    let io_err = |source| RunError::Io {
        path: path.to_path_buf(),
        source,
    };
    let file = fs::File::create(path).map_err(io_err)?;
    let mut w = BufWriter::new(file);
    body(&mut w).map_err(io_err)?;
    io::Write::flush(&mut w).map_err(io_err)
}

pub fn report_text(report: &RunReport) -> String {
    let c = &report.config;
    let a = &report.aggregate;
    let mut s = String::new();
    let _ = writeln!(
        s,
        "scheme {} | lasers {} | mode {} | seed {} | duration {} | trajectories {}",
        c.kind.scheme,
        c.kind.lasers.as_str(),
        c.mode.as_str(),
        c.master_seed,
        c.duration,
        c.trajectories
    );
    let _ = writeln!(
        s,
        "rates: strong absorb {} emit {} | weak absorb {} emit {} | threshold gap {}",
        c.rates.strong_absorb,
        c.rates.strong_emit,
        c.rates.weak_absorb,
        c.rates.weak_emit,
        c.threshold_gap()
    );
    let _ = writeln!(s);
    for t in &report.trajectories {
        let _ = writeln!(
            s,
            "trajectory {}: {} hits, {} bright / {} dark intervals, dark entries per hit {}",
            t.index, t.hits, t.bright_intervals, t.dark_intervals, t.dark_entry_frequency
        );
        let _ = writeln!(
            s,
            "  bright mean {} sd {} | dark mean {} sd {} | dark rate {}",
            t.bright_mean,
            t.bright_std_dev,
            t.dark_mean,
            t.dark_std_dev,
            t.dark_rate.map_or("-".to_string(), |r| r.to_string())
        );
        if let Some(tm) = t.timing {
            let _ = writeln!(
                s,
                "  weak photon: {} at start, {} at end, {} ambiguous",
                tm.at_start, tm.at_end, tm.ambiguous
            );
        }
        let _ = writeln!(
            s,
            "  invariants: {} steps, max |mass - 1| {:e}, final max |dm/dt| {:e}",
            t.steps, t.max_mass_drift, t.final_mass_rate
        );
    }
    let _ = writeln!(s);
    let _ = writeln!(
        s,
        "total: {} hits, {} dark intervals, dark entries per hit {}, mean dark duration {}",
        a.hits, a.dark_intervals, a.dark_entry_frequency, a.dark_mean
    );
    if let Some(tm) = a.timing {
        let _ = writeln!(
            s,
            "weak photon: {} at start, {} at end, {} ambiguous",
            tm.at_start, tm.at_end, tm.ambiguous
        );
    }
    let _ = writeln!(s, "max |mass - 1| {:e}", a.max_mass_drift);
    s
}

#[derive(Serialize)]
struct ConfigLine<'a> {
    record: &'static str,
    kind: &'static str,
    lasers: &'static str,
    mode: &'static str,
    rates: &'a RateSet,
    duration: f64,
    dt_max: f64,
    macro_dt: f64,
    depth: u32,
    master_seed: u64,
    trajectories: u64,
    threshold_gap: f64,
}

#[derive(Serialize)]
struct Tagged<'a, T: Serialize> {
    record: &'static str,
    #[serde(flatten)]
    body: &'a T,
}

pub fn report_jsonl(report: &RunReport) -> String {
    let c = &report.config;
    let mut lines = vec![serde_json::to_string(&ConfigLine {
        record: "config",
        kind: c.kind.scheme.as_str(),
        lasers: c.kind.lasers.as_str(),
        mode: c.mode.as_str(),
        rates: &c.rates,
        duration: c.duration,
        dt_max: c.dt_max,
        macro_dt: c.macro_dt(),
        depth: c.depth,
        master_seed: c.master_seed,
        trajectories: c.trajectories,
        threshold_gap: c.threshold_gap(),
    })];
    for t in &report.trajectories {
        lines.push(serde_json::to_string(&Tagged {
            record: "trajectory",
            body: t,
        }));
    }
    lines.push(serde_json::to_string(&Tagged {
        record: "aggregate",
        body: &report.aggregate,
    }));
    let mut out = String::new();
    for line in lines {
        out.push_str(&line.expect("report fields serialize"));
        out.push('\n');
    }
    out
}
