//! Hit fractions follow the delivered masses.
//!
//! One source feeds a ready target at rate k₁ and a silent sink at rate k₂.
//! The per-step trigger fires on the target in a fraction k₁/(k₁+k₂) of
//! trajectories.
//!
//!     cargo run --release --example trigger_calibration

use shelving::dynamics::{oracle::integrate_exact_oracle, CurrentReport, EdgeKind, FlowEdge, Integrator};
use shelving::rules::trigger;
use shelving::state::{make_label, AtomLevel, ReadyMarks};
use shelving::{trajectory_rng, ChainState, Component, ComponentLabel, Mode};

fn testbed(m: f64) -> shelving::Result<(ChainState, Vec<FlowEdge>)> {
    let root = ComponentLabel::ground();
    let target = make_label(AtomLevel::Ground0, 1, 1, 0, ReadyMarks::BOTH)?;
    let sink = make_label(AtomLevel::Weak2, 0, 0, 0, ReadyMarks::NONE)?;
    let mut state = ChainState::new(root, Mode::NuRules);
    for label in [target, sink] {
        state.insert(Component { label, mass: 0.0 })?;
    }
    let edges = vec![
        FlowEdge::new(root, target, m, EdgeKind::StrongEmit)?,
        FlowEdge::new(root, sink, 1.0 - m, EdgeKind::WeakAbsorb)?,
    ];
    Ok((state, edges))
}

fn main() -> shelving::Result<()> {
    let runs = 10_000u64;
    for m in [0.5, 0.9, 0.999] {
        let (state, edges) = testbed(m)?;
        let settled = integrate_exact_oracle(&state, &edges, 40.0)?;
        let delivered = settled.mass_of(&edges[0].to).unwrap_or(0.0);

        let mut integrator = Integrator::new();
        let system = integrator.compile(&state, &edges)?;
        let mut report = CurrentReport::default();
        let mut hits = 0u64;
        for i in 0..runs {
            let mut rng = trajectory_rng(2024, i);
            let mut s = state.clone();
            while s.time < 40.0 {
                let before = s.clone();
                integrator.advance(&mut s, &system, 0.05, &mut report)?;
                if trigger(&before, &report, &mut rng).is_some() {
                    hits += 1;
                    break;
                }
            }
        }
        let frac = hits as f64 / runs as f64;
        let sigma = (m * (1.0 - m) / runs as f64).sqrt();
        println!(
            "m={m}: oracle delivered {delivered:.9}, hit fraction {frac:.4} ({:+.2} σ)",
            (frac - m) / sigma
        );
    }
    Ok(())
}
