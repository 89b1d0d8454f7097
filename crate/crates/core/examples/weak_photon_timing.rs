//! Where the weak photon falls inside a dark period, for all four schemes.
//!
//! In V and in the cascade whose weak level lies above ground, the dark
//! period ends with the weak photon; in Λ and the other cascade it begins
//! with it.
//!
//!     cargo run --release --example weak_photon_timing

use shelving::analysis::{
    classify_weak_timing, default_threshold_gap, segment_telegraph, TimingWindows, WeakTiming,
};
use shelving::configurations::weak_edge_position;
use shelving::{ConfigKind, LevelScheme, SimOptions, Trajectory};

fn main() -> shelving::Result<()> {
    for scheme in LevelScheme::ALL {
        let kind = ConfigKind::both(scheme);
        let opts = SimOptions::new(kind);
        let mut traj = Trajectory::seeded(opts, 7, 0)?;
        traj.run_until(1e5)?;
        let seg = segment_telegraph(traj.log(), default_threshold_gap(&opts.rates))?;
        let report = classify_weak_timing(traj.log(), &seg, kind, TimingWindows::from_rates(&opts.rates))?;
        println!(
            "{:<18} graph: {:<22} dark {:>3}: at start {:>3}, at end {:>3}, ambiguous {}",
            scheme.to_string(),
            format!("{:?}", weak_edge_position(kind)),
            report.intervals.len(),
            report.count(WeakTiming::AtStart),
            report.count(WeakTiming::AtEnd),
            report.count(WeakTiming::Ambiguous)
        );
        if let Some(d) = report.intervals.first() {
            println!(
                "    e.g. dark {:.1}..{:.1}, weak photon at {:.1}",
                d.dark_start,
                d.dark_end,
                d.weak_crossing_time.unwrap_or(f64::NAN)
            );
        }
    }
    Ok(())
}
