//! Parses a configuration document and runs it, writing the per-trajectory
//! logs and the text and JSON-lines reports.
//!
//!     cargo run --release --example run_config

use shelving::cli::{parse_config, report_text, run};

const CONFIG: &str = "\
# Λ scheme, two trajectories
kind = lambda
duration = 5e4
trajectories = 2
master_seed = 11
";

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut config = parse_config(CONFIG)?;
    config.out_dir = std::env::temp_dir().join("shelving-run-config-example");
    let report = run(&config)?;
    print!("{}", report_text(&report));
    for entry in std::fs::read_dir(&config.out_dir)? {
        let entry = entry?;
        println!("wrote {} ({} bytes)", entry.path().display(), entry.metadata()?.len());
    }
    Ok(())
}
