// Prints the depth-2 epoch graph of every level scheme: components, edges,
// which edges are stalled by rule 4, and where φ′ sits in the weak cycle.
//
//     cargo run --example epoch_graphs

use shelving::configurations::weak_edge_position;
use shelving::rules::is_blocked;
use shelving::{build_epoch, ComponentLabel, ConfigKind, LevelScheme, RateSet};

pub fn run_example() -> shelving::Result<()> {
    for scheme in LevelScheme::ALL {
        let kind = ConfigKind::both(scheme);
        let graph = build_epoch(kind, ComponentLabel::ground(), RateSet::default(), 2)?;
        println!(
            "{scheme}: {} components ({} ready), {} edges, weak photon {:?}",
            graph.nodes().len(),
            graph.ready_count(),
            graph.edges().len(),
            weak_edge_position(kind)
        );
        for e in graph.edges() {
            let stall = if is_blocked(&e.from, &e.to) { "  [blocked]" } else { "" };
            println!("  {} -> {}  {:?} k={}{stall}", e.from, e.to, e.kind, e.rate);
        }
        let frontier: Vec<String> = graph.frontier().iter().map(|l| l.to_string()).collect();
        println!("  frontier: {}", frontier.join(", "));
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> shelving::Result<()> {
    run_example()
}
