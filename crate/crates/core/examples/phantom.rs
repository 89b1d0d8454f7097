//! A phantom component during a dark period.
//!
//! When the weak branch wins, the strong-branch ready component keeps the
//! mass it already received but gets no more. It is never hit; the epoch
//! ends on the ready component of the weak branch.
//!
//!     cargo run --release --example phantom

use shelving::{SimOptions, Trajectory};

fn main() -> shelving::Result<()> {
    let opts = SimOptions::default();
    let mut traj = Trajectory::seeded(opts, 42, 0)?;
    let mut last = 0.0;
    loop {
        let epoch_start = traj.epoch_start();
        // step in small chunks so the dormant components of this epoch are visible
        let hit = traj.next_hit(traj.time() + 50.0)?;
        if hit.is_none() && traj.time() - epoch_start > 40.0 && !traj.phantoms().is_empty() {
            println!("dark since t={epoch_start:.1}; phantoms:");
            for p in traj.phantoms() {
                println!("  {}  frozen mass {:.6}  dormant since {:.1}", p.label, p.mass_frozen, p.dormant_since);
            }
            let hit = loop {
                if let Some(hit) = traj.next_hit(traj.time() + 1e4)? {
                    break hit;
                }
            };
            println!(
                "hit at t={:.1} on {} (mass {:.6}), weak photons in the record: {}",
                hit.time, hit.target, hit.delivered_mass_at_hit, hit.target.photons.weak
            );
            return Ok(());
        }
        if let Some(h) = hit {
            last = h.time;
        }
        if last > 1e6 {
            println!("no dark period found");
            return Ok(());
        }
    }
}
