//! Command-line front end: `shelving --config run.conf --seed 42 --out out/`.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use shelving::cli::{parse_config, run, ConfigError, RunConfig, RunError};

/// Simulates a driven three-level atom under the collapse rules and writes
/// event logs plus an interval and timing report.
#[derive(Parser, Debug)]
#[command(version)]
struct Args {
    /// Configuration file of `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Level scheme: v, lambda, cascade_weak_up, cascade_weak_down.
    #[arg(long)]
    kind: Option<String>,
    /// Driven transitions: both, strong_only, weak_only.
    #[arg(long)]
    lasers: Option<String>,
    /// Rule set: nurules, original_with_observer, original_no_observer.
    #[arg(long)]
    mode: Option<String>,
    /// Master seed of the ensemble.
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    duration: Option<String>,
    #[arg(long)]
    trajectories: Option<String>,
    #[arg(long = "dt-max")]
    dt_max: Option<String>,
    /// Dark-gap threshold, or `auto`.
    #[arg(long = "threshold-gap")]
    threshold_gap: Option<String>,
    /// Output directory.
    #[arg(long)]
    out: Option<String>,
}

fn configure(args: &Args) -> Result<RunConfig, RunError> {
    let mut config = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|source| RunError::Io {
                path: path.clone(),
                source,
            })?;
            parse_config(&text)?
        }
        None => RunConfig::default(),
    };
    let overrides = [
        ("kind", &args.kind),
        ("lasers", &args.lasers),
        ("mode", &args.mode),
        ("master_seed", &args.seed),
        ("duration", &args.duration),
        ("trajectories", &args.trajectories),
        ("dt_max", &args.dt_max),
        ("threshold_gap", &args.threshold_gap),
        ("out_dir", &args.out),
    ];
    for (key, value) in overrides {
        if let Some(value) = value {
            config
                .set(key, value)
                .map_err(|message| ConfigError { line: 0, message })?;
        }
    }
    config
        .validate()
        .map_err(|message| ConfigError { line: 0, message })?;
    Ok(config)
}

fn main() -> ExitCode {
    let args = Args::parse();
    let result = configure(&args).and_then(|config| run(&config));
    match result {
        Ok(report) => {
            print!("{}", shelving::cli::report_text(&report));
            ExitCode::SUCCESS
        }
        Err(err) => {
            eprintln!("shelving: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
