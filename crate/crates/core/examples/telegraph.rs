//! Fluorescent telegraph pulsing of the V configuration.
//!
//! Bright periods are runs of clicks a strong cycle apart; the atom goes
//! dark whenever the weak branch wins the competition at the ground level.
//!
//!     cargo run --release --example telegraph -- [duration] [seed]

use shelving::analysis::{default_threshold_gap, interval_stats, segment_telegraph, Phase};
use shelving::{SimOptions, Trajectory};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let duration: f64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(2e5);
    let seed: u64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(42);

    let opts = SimOptions::default();
    let mut traj = Trajectory::seeded(opts, seed, 0)?;
    traj.run_until(duration)?;

    let seg = segment_telegraph(traj.log(), default_threshold_gap(&opts.rates))?;
    for i in seg.intervals.iter().take(12) {
        let bar = match i.phase {
            Phase::Bright => "█",
            Phase::Dark => "·",
        };
        let width = (i.duration() / 200.0).ceil().clamp(1.0, 60.0) as usize;
        println!("{:>9.1} {:>9.1}  {}", i.start, i.end, bar.repeat(width));
    }

    let stats = interval_stats(&seg);
    let hits = traj.hits() as f64;
    let r = opts.rates;
    let share = r.weak_absorb / (r.weak_absorb + r.strong_absorb);
    println!("clicks: {}", traj.hits());
    println!(
        "dark intervals: {} (dark entries per click {:.6}, branch share {:.6})",
        stats.dark.count,
        stats.dark.count as f64 / hits,
        share
    );
    println!(
        "bright mean {:.1} sd {:.1}; dark mean {:.1} sd {:.1}; fitted dark rate {:?}",
        stats.bright.mean, stats.bright.std_dev, stats.dark.mean, stats.dark.std_dev, stats.dark_rate
    );
    Ok(())
}
