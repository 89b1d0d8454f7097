//! Ready marking, rule-4 blocking, the stochastic trigger and collapse.
//!
//! The trigger hits a ready component at a rate equal to the net positive
//! probability current flowing into it, taken relative to the mass that is
//! still unresolved (not yet parked in any ready component). The
//! unconditional probability of a hit on `j` during `[t, t+dt]` is then
//! exactly the mass delivered into `j` during that interval: full delivery
//! means a certain hit, a dormant phantom is never hit, and the hit
//! fractions reproduce the Born weights of the branches.
//!
//! [`Trigger`] realizes the same law with a single uniform draw per epoch:
//! the hit happens when the cumulative mass delivered to ready components
//! first exceeds the drawn threshold. [`trigger`] is the per-step Bernoulli
//! form of the same law.

use rand::Rng;

use crate::dynamics::{CurrentReport, FlowEdge};
use crate::error::{Error, Result};
use crate::state::{ChainState, ComponentLabel, Mode, ReadyMarks};

/// Which parts of the collapse machinery are in force.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RuleSet {
    pub ready_marking: bool,
    pub blocking: bool,
    pub trigger: bool,
}

impl RuleSet {
    pub fn for_mode(mode: Mode) -> Self {
        match mode {
            // with an observer the original rules act exactly like the nuRules
            Mode::NuRules | Mode::OriginalWithObserver => RuleSet {
                ready_marking: true,
                blocking: true,
                trigger: true,
            },
            Mode::OriginalNoObserver => RuleSet {
                ready_marking: false,
                blocking: false,
                trigger: false,
            },
        }
    }
}

pub fn apply_mode(state: &ChainState) -> RuleSet {
    RuleSet::for_mode(state.mode)
}

/// A child is decoherent from its parent when the detector has recorded
/// something new, or when it continues a chain that is already ready.
pub fn is_decoherent(parent: &ComponentLabel, child: &ComponentLabel) -> bool {
    child.clicks() != parent.clicks() || parent.is_ready()
}

/// Marks the atom and detector of a decoherent child as ready.
pub fn mark_ready(_parent: &ComponentLabel, child: &ComponentLabel, decoherent: bool) -> ComponentLabel {
    if decoherent {
        child.with_ready(ReadyMarks::BOTH)
    } else {
        *child
    }
}

/// Rule 4: no current between two components holding ready states of the
/// same object.
pub fn is_blocked(from: &ComponentLabel, to: &ComponentLabel) -> bool {
    (from.ready.atom && to.ready.atom) || (from.ready.detector && to.ready.detector)
}

pub fn blocked_edges(state: &ChainState) -> Vec<FlowEdge> {
    if !apply_mode(state).blocking {
        return Vec::new();
    }
    state
        .edges()
        .iter()
        .filter(|e| is_blocked(&e.from, &e.to))
        .copied()
        .collect()
}

/// The edges that carry current: all edges minus the rule-4 blocked ones.
pub fn active_edges(state: &ChainState) -> Vec<FlowEdge> {
    let blocking = apply_mode(state).blocking;
    state
        .edges()
        .iter()
        .filter(|e| !(blocking && is_blocked(&e.from, &e.to)))
        .copied()
        .collect()
}

/// Mass parked in ready components.
pub fn resolved_mass(state: &ChainState) -> f64 {
    state
        .components()
        .iter()
        .filter(|c| c.label.is_ready())
        .map(|c| c.mass)
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HitEvent {
    pub time: f64,
    pub target: ComponentLabel,
    pub epoch: u64,
    /// Mass of the target at the instant of the hit.
    pub delivered_mass_at_hit: f64,
}

/// A ready component whose inflow has ceased.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhantomRecord {
    pub label: ComponentLabel,
    pub mass_frozen: f64,
    pub dormant_since: f64,
}

/// Ready components holding mass but receiving no more than `tolerance` of
/// inflow current during the reported step.
pub fn dormant_components(state: &ChainState, report: &CurrentReport, tolerance: f64) -> Vec<PhantomRecord> {
    report
        .inflow
        .iter()
        .filter(|(label, net)| label.is_ready() && *net <= tolerance)
        .filter_map(|(label, _)| {
            let mass = state.mass_of(label)?;
            (mass > 0.0).then_some(PhantomRecord {
                label: *label,
                mass_frozen: mass,
                dormant_since: report.time,
            })
        })
        .collect()
}

/// Per-step form of the trigger: given the state before a step and the
/// step's report, each ready target is hit with probability equal to its
/// delivered mass divided by the unresolved mass at the step start.
pub fn trigger<R: Rng + ?Sized>(before: &ChainState, report: &CurrentReport, rng: &mut R) -> Option<HitEvent> {
    if !apply_mode(before).trigger {
        return None;
    }
    let unresolved = 1.0 - resolved_mass(before);
    if unresolved <= 0.0 {
        return None;
    }
    let deliveries: Vec<(ComponentLabel, f64)> = report
        .inflow
        .iter()
        .filter(|(label, net)| label.is_ready() && *net > 0.0)
        .map(|&(label, net)| (label, net * report.dt))
        .collect();
    let total: f64 = deliveries.iter().map(|d| d.1).sum();
    let u: f64 = rng.gen::<f64>() * unresolved;
    if u >= total {
        return None;
    }
    let mut acc = 0.0;
    for &(label, delivered) in &deliveries {
        if u < acc + delivered {
            let frac = (u - acc) / delivered;
            let before_mass = before.mass_of(&label).unwrap_or(0.0);
            return Some(HitEvent {
                time: report.time + frac * report.dt,
                target: label,
                epoch: before.epoch,
                delivered_mass_at_hit: before_mass + frac * delivered,
            });
        }
        acc += delivered;
    }
    None
}

/// Epoch-level form of the trigger: one uniform threshold per epoch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Trigger {
    threshold: f64,
}

impl Trigger {
    pub fn arm<R: Rng + ?Sized>(rng: &mut R) -> Self {
        Trigger {
            threshold: rng.gen::<f64>(),
        }
    }

    pub fn with_threshold(threshold: f64) -> Self {
        Trigger { threshold }
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn crossed(&self, resolved: f64) -> bool {
        resolved > self.threshold
    }

    /// Locates the hit inside a step whose end crosses the threshold.
    /// `ready` lists the state indices of the ready components; returns the
    /// chosen index, the fraction of the step elapsed at the hit, and the
    /// target's mass at that instant.
    pub fn locate(&self, before: &ChainState, after: &ChainState, ready: &[usize]) -> Option<(usize, f64, f64)> {
        let start: f64 = ready.iter().map(|&i| before.mass_at(i)).sum();
        let need = self.threshold - start;
        let total: f64 = ready
            .iter()
            .map(|&i| (after.mass_at(i) - before.mass_at(i)).max(0.0))
            .sum();
        if total <= 0.0 || need >= total {
            return None;
        }
        let need = need.max(0.0);
        let mut acc = 0.0;
        for &i in ready {
            let delivered = (after.mass_at(i) - before.mass_at(i)).max(0.0);
            if delivered > 0.0 && need < acc + delivered {
                let frac = need / total;
                return Some((i, frac, before.mass_at(i) + (need - acc)));
            }
            acc += delivered;
        }
        None
    }
}

/// Rule 3: the hit component becomes realized with unit mass and every
/// other component is reduced to zero. The returned state opens the next
/// epoch and carries no edges; the caller builds the next epoch graph.
pub fn collapse(state: &ChainState, hit: &HitEvent) -> Result<ChainState> {
    if state.index_of(&hit.target).is_none() {
        return Err(Error::UnknownComponent(hit.target));
    }
    if !hit.target.is_ready() {
        return Err(Error::IllegalHit(hit.target));
    }
    let mut next = ChainState::new(hit.target.realized(), state.mode);
    next.epoch = state.epoch + 1;
    next.time = hit.time;
    Ok(next)
}
