use std::fs;
use std::path::PathBuf;
use std::process::Command;

use shelving::cli::{parse_config, run, simulate, RunConfig, RunError, ThresholdGap};
use shelving::{ConfigKind, EventLog, LevelScheme, Mode, RecordKind};

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("shelving-cli-{}-{name}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    dir
}

fn short_config(out_dir: PathBuf) -> RunConfig {
    RunConfig {
        duration: 2e4,
        trajectories: 2,
        master_seed: 11,
        out_dir,
        ..RunConfig::default()
    }
}

#[test]
fn config_document_sets_every_key() {
    let text = "\
# lambda ensemble
kind = lambda
lasers = both
k_strong_absorb = 2.0
k_strong_emit = 0.5
k_weak_absorb = 0.002
k_weak_emit = 0.003
mode = original_with_observer
duration = 1e5   # per trajectory
dt_max = 0.02
macro_dt = 0.5
depth = 3
master_seed = 99
trajectories = 4
threshold_gap = 120
out_dir = somewhere
";
    let c = parse_config(text).unwrap();
    assert_eq!(c.kind, ConfigKind::both(LevelScheme::Lambda));
    assert_eq!(c.rates.strong_absorb, 2.0);
    assert_eq!(c.rates.strong_emit, 0.5);
    assert_eq!(c.rates.weak_absorb, 0.002);
    assert_eq!(c.rates.weak_emit, 0.003);
    assert_eq!(c.mode, Mode::OriginalWithObserver);
    assert_eq!(c.duration, 1e5);
    assert_eq!(c.dt_max, 0.02);
    assert_eq!(c.macro_dt(), 0.5);
    assert_eq!(c.depth, 3);
    assert_eq!(c.master_seed, 99);
    assert_eq!(c.trajectories, 4);
    assert_eq!(c.threshold_gap, ThresholdGap::Fixed(120.0));
    assert_eq!(c.threshold_gap(), 120.0);
    assert_eq!(c.out_dir, PathBuf::from("somewhere"));
}

#[test]
fn config_defaults() {
    let c = parse_config("").unwrap();
    assert_eq!(c.kind, ConfigKind::both(LevelScheme::V));
    assert_eq!(c.mode, Mode::NuRules);
    assert_eq!(c.duration, 2e6);
    assert_eq!(c.dt_max, 0.01);
    assert_eq!(c.master_seed, 0);
    assert_eq!(c.threshold_gap, ThresholdGap::Auto);
    assert_eq!(c.threshold_gap(), 40.0);
}

#[test]
fn config_errors_name_the_line() {
    let cases = [
        ("kind = v\nkind = w\n", 2),
        ("duration = -1\n", 1),
        ("\n\nno equals sign\n", 3),
        ("mystery = 1\n", 1),
        ("k_weak_emit = 0\n", 1),
        ("trajectories = 1.5\n", 1),
    ];
    for (text, line) in cases {
        let err = parse_config(text).unwrap_err();
        assert_eq!(err.line, line, "{text:?}: {err}");
        assert!(err.to_string().starts_with(&format!("line {line}:")));
    }
}

#[test]
fn run_writes_logs_and_reports() {
    let dir = scratch("files");
    let config = short_config(dir.clone());
    let report = run(&config).unwrap();
    assert_eq!(report.trajectories.len(), 2);
    for (i, t) in report.trajectories.iter().enumerate() {
        let text = fs::read_to_string(dir.join(format!("trajectory_{i}.tsv"))).unwrap();
        let log = EventLog::parse_tsv(&text).unwrap();
        assert_eq!(log.of_kind(RecordKind::Hit).count(), t.hits);
    }
    let txt = fs::read_to_string(dir.join("report.txt")).unwrap();
    assert!(!txt.is_empty());
    let jsonl = fs::read_to_string(dir.join("report.jsonl")).unwrap();
    let records: Vec<serde_json::Value> = jsonl.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(records.len(), 4);
    fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn trajectories_use_distinct_streams() {
    let (logs, _) = simulate(&short_config(PathBuf::new())).unwrap();
    assert_ne!(logs[0], logs[1]);
    let (again, _) = simulate(&short_config(PathBuf::new())).unwrap();
    assert_eq!(logs, again);
}

#[test]
fn no_observer_run_has_no_hits() {
    let config = RunConfig {
        mode: Mode::OriginalNoObserver,
        trajectories: 1,
        ..short_config(PathBuf::new())
    };
    let (logs, report) = simulate(&config).unwrap();
    assert_eq!(logs[0].of_kind(RecordKind::Hit).count(), 0);
    assert_eq!(report.aggregate.hits, 0);
    assert_eq!(report.aggregate.dark_intervals, 0);
}

#[test]
fn unwritable_output_is_an_io_error() {
    let blocker = scratch("blocker");
    fs::write(&blocker, "not a directory").unwrap();
    let config = RunConfig {
        trajectories: 1,
        ..short_config(blocker.join("out"))
    };
    let err = run(&config).unwrap_err();
    assert!(matches!(err, RunError::Io { .. }));
    assert_eq!(err.exit_code(), 1);
    fs::remove_file(&blocker).unwrap();
}

#[test]
fn binary_honours_flags_over_the_config_file() {
    let dir = scratch("bin");
    fs::create_dir_all(&dir).unwrap();
    let conf = dir.join("run.conf");
    fs::write(&conf, "kind = lambda\nduration = 1e6\ntrajectories = 3\n").unwrap();
    let out = dir.join("out");
    let status = Command::new(env!("CARGO_BIN_EXE_shelving"))
        .arg("--config")
        .arg(&conf)
        .args(["--seed", "5", "--duration", "5000", "--trajectories", "1", "--out"])
        .arg(&out)
        .output()
        .unwrap();
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    assert!(out.join("trajectory_0.tsv").exists());
    assert!(!out.join("trajectory_1.tsv").exists());
    let jsonl = fs::read_to_string(out.join("report.jsonl")).unwrap();
    assert!(jsonl.contains("lambda"));

    let bad = Command::new(env!("CARGO_BIN_EXE_shelving"))
        .args(["--kind", "triangle", "--out"])
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("command line"));
    fs::remove_dir_all(&dir).unwrap();
}
