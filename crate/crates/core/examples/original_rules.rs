//! The original rules with and without an observer.
//!
//! Without an observer nothing is ever marked ready, no collapse happens,
//! and the level populations settle to a steady unpulsed equilibrium. With
//! an observer the original rules behave exactly like the nuRules.
//!
//!     cargo run --release --example original_rules

use shelving::{Mode, SimOptions, Trajectory};

fn main() -> shelving::Result<()> {
    let mut opts = SimOptions::default();
    opts.mode = Mode::OriginalNoObserver;
    let mut traj = Trajectory::seeded(opts, 5, 0)?;
    for t in [10.0, 100.0, 1e3, 1e4, 3e4] {
        traj.run_until(t)?;
        let masses: Vec<String> = traj
            .state()
            .components()
            .iter()
            .map(|c| format!("{}={:.6}", c.label, c.mass))
            .collect();
        println!("t={t:>7}: {}  max|dm/dt|={:.2e}", masses.join(" "), traj.max_mass_rate());
    }
    println!("hits without observer: {}", traj.hits());

    let logs: Vec<String> = [Mode::NuRules, Mode::OriginalWithObserver]
        .into_iter()
        .map(|mode| {
            let mut opts = SimOptions::default();
            opts.mode = mode;
            let mut traj = Trajectory::seeded(opts, 5, 0)?;
            traj.run_until(2e4)?;
            Ok(traj.log().to_tsv())
        })
        .collect::<shelving::Result<_>>()?;
    println!(
        "with observer: log identical to nuRules: {} ({} bytes)",
        logs[0] == logs[1],
        logs[0].len()
    );
    Ok(())
}
