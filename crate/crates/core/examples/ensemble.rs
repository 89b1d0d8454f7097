//! A seeded ensemble: every trajectory draws from its own stream of the
//! master seed, so reruns reproduce each log exactly.
//!
//!     cargo run --release --example ensemble

use shelving::analysis::{default_threshold_gap, segment_telegraph};
use shelving::{run_ensemble, SimOptions, Trajectory};

fn main() -> shelving::Result<()> {
    let opts = SimOptions::default();
    let logs = run_ensemble(opts, 99, 4, 2e4)?;
    for (i, log) in logs.iter().enumerate() {
        let seg = segment_telegraph(log, default_threshold_gap(&opts.rates))?;
        println!("trajectory {i}: {} clicks, {} dark intervals", log.hits().count(), seg.dark_count());
    }

    let mut again = Trajectory::seeded(opts, 99, 2)?;
    again.run_until(2e4)?;
    println!("trajectory 2 rerun identical: {}", again.log() == &logs[2]);
    Ok(())
}
