//! The strong transition alone: the chain stalls at the first ready
//! component and every epoch ends in a click a few cycles later.
//!
//!     cargo run --release --example strong_only

use shelving::analysis::{default_threshold_gap, interval_stats, segment_telegraph};
use shelving::dynamics::Integrator;
use shelving::rules::{active_edges, blocked_edges};
use shelving::{build_epoch, ComponentLabel, ConfigKind, LevelScheme, Mode, RateSet, SimOptions, Trajectory};

fn main() -> shelving::Result<()> {
    let kind = ConfigKind::strong_only(LevelScheme::V);
    let rates = RateSet::default();

    // A0⊗D0 + A1⊗D0 + A̲0D̲1 (+) A̲1D̲1 (+) A̲0D̲2
    let graph = build_epoch(kind, ComponentLabel::ground(), rates, 2)?;
    let mut state = graph.to_state(Mode::NuRules);
    let edges = active_edges(&state);
    println!("blocked edges:");
    for e in blocked_edges(&state) {
        println!("  {} -> {}", e.from, e.to);
    }

    let mut integrator = Integrator::new();
    let system = integrator.compile(&state, &edges)?;
    for _ in 0..5 {
        integrator.advance_quiet(&mut state, &system, 2.0)?;
        let masses: Vec<String> = state
            .components()
            .iter()
            .map(|c| format!("{}={:.4}", c.label, c.mass))
            .collect();
        println!("t={:>4}: {}", state.time, masses.join("  "));
    }

    let opts = SimOptions::new(kind);
    let mut traj = Trajectory::seeded(opts, 1, 0)?;
    traj.run_until(1e4)?;
    let seg = segment_telegraph(traj.log(), default_threshold_gap(&rates))?;
    let stats = interval_stats(&seg);
    println!(
        "{} clicks in 10⁴ time units, {} dark intervals, mean click gap {:.3}",
        traj.hits(),
        stats.dark.count,
        traj.time() / traj.hits() as f64
    );
    Ok(())
}
