//! Seeded single-trajectory runs.
//!
//! Each epoch starts from a realized root, grows the epoch graph, and moves
//! mass along the unblocked edges with the exact propagator. Steps are taken
//! at `macro_dt`; a step that carries the delivered ready mass past the
//! epoch's trigger threshold is bisected down to `dt_max`, and the hit is
//! placed inside the final sub-step by linear interpolation of the delivered
//! mass. Frontier nodes are grown as soon as mass reaches them, by redoing
//! the step on the larger graph.
//!
//! When no collapse can ever occur (no observer, or no strong laser to
//! produce clicks) the epoch graph is the folded record-blind loop.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::configurations::{build_epoch, build_record_blind, ConfigKind, EpochGraph, Lasers, LevelScheme};
use crate::dynamics::{ActiveSystem, EdgeKind, Integrator, RateSet};
use crate::error::{Error, Result};
use crate::log::{EventLog, Record, RecordKind};
use crate::rules::{active_edges, collapse, is_blocked, HitEvent, PhantomRecord, RuleSet, Trigger};
use crate::state::{ChainState, ComponentLabel, Mode, MASS_TOLERANCE};

/// Mass below which a ready component counts as empty for phantom tracking.
const PHANTOM_MASS: f64 = 1e-12;

/// Bins per strong cycle when locating weak-photon emission instants.
const CROSSING_BINS_PER_CYCLE: f64 = 16.0;

/// Smallest posterior weight of a logged weak crossing.
const CROSSING_MIN_WEIGHT: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimOptions {
    pub kind: ConfigKind,
    pub rates: RateSet,
    pub mode: Mode,
    /// Cycles per track in a freshly built epoch graph.
    pub depth: u32,
    /// Finest step used to locate a hit.
    pub dt_max: f64,
    /// Step used while no hit is due.
    pub macro_dt: f64,
    /// Frontier mass that triggers growing the graph.
    pub extend_tol: f64,
}

impl SimOptions {
    pub fn new(kind: ConfigKind) -> Self {
        SimOptions {
            kind,
            rates: RateSet::default(),
            mode: Mode::NuRules,
            depth: 2,
            dt_max: 0.01,
            macro_dt: 0.64,
            extend_tol: 1e-15,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.rates.validate()?;
        if self.depth < 1 {
            return Err(Error::InvalidDepth(self.depth));
        }
        for dt in [self.dt_max, self.macro_dt] {
            if !(dt > 0.0 && dt.is_finite()) {
                return Err(Error::InvalidStep(dt));
            }
        }
        if self.macro_dt < self.dt_max {
            return Err(Error::InvalidStep(self.macro_dt));
        }
        Ok(())
    }

    /// Whether the run uses the folded graph and never collapses.
    pub fn is_record_blind(&self) -> bool {
        !RuleSet::for_mode(self.mode).trigger || self.kind.lasers == Lasers::WeakOnly
    }
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions::new(ConfigKind::both(LevelScheme::V))
    }
}

/// The random stream of trajectory `index` under `master_seed`.
pub fn trajectory_rng(master_seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(index);
    rng
}

/// Ready node with the edge feeding it.
#[derive(Debug, Clone, Copy)]
struct ReadyNode {
    node: usize,
    parent: Option<usize>,
    inflow_rate: f64,
}

pub struct Trajectory {
    opts: SimOptions,
    rng: ChaCha8Rng,
    integrator: Integrator,
    graph: EpochGraph,
    state: ChainState,
    system: ActiveSystem,
    ready: Vec<ReadyNode>,
    ready_idx: Vec<usize>,
    trigger: Option<Trigger>,
    epoch_start: f64,
    log: EventLog,
    phantoms: Vec<PhantomRecord>,
    snapshot: Vec<f64>,
    max_drift: f64,
    steps: u64,
    hits: u64,
}

impl Trajectory {
    pub fn new(opts: SimOptions, rng: ChaCha8Rng) -> Result<Self> {
        opts.validate()?;
        let root = ComponentLabel::ground();
        let graph = Self::graph_for(&opts, root)?;
        let mut integrator = Integrator::new();
        let state = graph.to_state(opts.mode);
        let system = integrator.compile(&state, &active_edges(&state))?;
        let mut t = Trajectory {
            opts,
            rng,
            integrator,
            graph,
            state,
            system,
            ready: Vec::new(),
            ready_idx: Vec::new(),
            trigger: None,
            epoch_start: 0.0,
            log: EventLog::new(),
            phantoms: Vec::new(),
            snapshot: Vec::new(),
            max_drift: 0.0,
            steps: 0,
            hits: 0,
        };
        t.open_epoch(root, 0.0, 0)?;
        Ok(t)
    }

    /// Trajectory `index` of an ensemble seeded with `master_seed`.
    pub fn seeded(opts: SimOptions, master_seed: u64, index: u64) -> Result<Self> {
        Self::new(opts, trajectory_rng(master_seed, index))
    }

    fn graph_for(opts: &SimOptions, root: ComponentLabel) -> Result<EpochGraph> {
        if opts.is_record_blind() {
            build_record_blind(opts.kind, root, opts.rates)
        } else {
            build_epoch(opts.kind, root, opts.rates, opts.depth)
        }
    }

    pub fn options(&self) -> &SimOptions {
        &self.opts
    }

    pub fn state(&self) -> &ChainState {
        &self.state
    }

    pub fn graph(&self) -> &EpochGraph {
        &self.graph
    }

    pub fn log(&self) -> &EventLog {
        &self.log
    }

    pub fn into_log(self) -> EventLog {
        self.log
    }

    pub fn time(&self) -> f64 {
        self.state.time
    }

    pub fn epoch_start(&self) -> f64 {
        self.epoch_start
    }

    pub fn hits(&self) -> u64 {
        self.hits
    }

    /// Accepted macro steps so far.
    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Largest |Σ mass − 1| seen after any step.
    pub fn max_mass_drift(&self) -> f64 {
        self.max_drift
    }

    /// Ready components of the current epoch whose inflow has ceased.
    pub fn phantoms(&self) -> &[PhantomRecord] {
        &self.phantoms
    }

    pub fn trigger(&self) -> Option<Trigger> {
        self.trigger
    }

    /// Largest |dm/dt| over all components at the current state.
    pub fn max_mass_rate(&self) -> f64 {
        self.system
            .mass_derivative(&self.state)
            .into_iter()
            .fold(0.0, |acc, d| acc.max(d.abs()))
    }

    /// Advances to `t_end`, collapsing at every hit on the way.
    pub fn run_until(&mut self, t_end: f64) -> Result<()> {
        while !self.reached(t_end) {
            self.step_towards(t_end)?;
        }
        Ok(())
    }

    /// Advances until the next hit or `t_limit`, whichever comes first.
    pub fn next_hit(&mut self, t_limit: f64) -> Result<Option<HitEvent>> {
        while !self.reached(t_limit) {
            if let Some(hit) = self.step_towards(t_limit)? {
                return Ok(Some(hit));
            }
        }
        Ok(None)
    }

    fn reached(&self, t_end: f64) -> bool {
        t_end - self.state.time <= t_end.abs().max(1.0) * 1e-12
    }

    fn open_epoch(&mut self, root: ComponentLabel, time: f64, epoch: u64) -> Result<()> {
        self.graph = Self::graph_for(&self.opts, root)?;
        self.state = self.graph.to_state(self.opts.mode);
        self.state.time = time;
        self.state.epoch = epoch;
        self.epoch_start = time;
        self.phantoms.clear();
        self.refresh()?;
        self.trigger = if self.graph.is_record_blind() {
            None
        } else {
            Some(Trigger::arm(&mut self.rng))
        };
        let aux = self.trigger.map_or(0.0, |t| t.threshold());
        self.log.push(Record::new(time, RecordKind::EpochStart, epoch, &root, aux));
        Ok(())
    }

    /// Recompiles the active system and ready bookkeeping after the graph changed.
    fn refresh(&mut self) -> Result<()> {
        self.system = self.integrator.compile(&self.state, &active_edges(&self.state))?;
        let blocking = RuleSet::for_mode(self.opts.mode).blocking;
        self.ready.clear();
        for (i, node) in self.graph.nodes().iter().enumerate() {
            if !node.label.is_ready() {
                continue;
            }
            let (parent, inflow_rate) = match node.parent_edge {
                Some(e) => {
                    let edge = self.graph.edges()[e];
                    let active = !(blocking && is_blocked(&edge.from, &edge.to));
                    (Some(self.graph.edge_ends()[e].0), if active { edge.rate } else { 0.0 })
                }
                None => (None, 0.0),
            };
            self.ready.push(ReadyNode {
                node: i,
                parent,
                inflow_rate,
            });
        }
        self.ready_idx = self.ready.iter().map(|r| r.node).collect();
        Ok(())
    }

    fn resolved(&self) -> f64 {
        self.ready_idx.iter().map(|&i| self.state.mass_at(i)).sum()
    }

    fn save(&mut self) {
        self.snapshot.clear();
        self.snapshot.extend(self.state.components().iter().map(|c| c.mass));
    }

    fn restore(&mut self, time: f64) {
        for i in 0..self.state.len() {
            self.state.set_mass_at(i, self.snapshot.get(i).copied().unwrap_or(0.0));
        }
        self.state.time = time;
    }

    /// Grows every frontier node holding more than `extend_tol`.
    fn grow_frontier(&mut self) -> Result<bool> {
        let due: Vec<ComponentLabel> = self
            .graph
            .frontier_indices()
            .filter(|&i| self.state.mass_at(i) > self.opts.extend_tol)
            .map(|i| self.graph.nodes()[i].label)
            .collect();
        if due.is_empty() {
            return Ok(false);
        }
        let edges_before = self.graph.edges().len();
        for label in &due {
            for i in self.graph.extend(label)? {
                debug_assert_eq!(i, self.state.len());
                self.state.insert(crate::state::Component {
                    label: self.graph.nodes()[i].label,
                    mass: 0.0,
                })?;
            }
        }
        for e in &self.graph.edges()[edges_before..] {
            self.state.add_edge(*e)?;
        }
        self.refresh()?;
        Ok(true)
    }

    /// One macro step (shortened to end at `t_end`). Returns the hit if the
    /// step produced one.
    fn step_towards(&mut self, t_end: f64) -> Result<Option<HitEvent>> {
        if self.reached(t_end) {
            return Ok(None);
        }
        let dt = self.opts.macro_dt.min(t_end - self.state.time);
        let t0 = self.state.time;
        self.save();
        loop {
            self.integrator.advance_quiet(&mut self.state, &self.system, dt)?;
            if !self.grow_frontier()? {
                break;
            }
            self.restore(t0);
        }
        self.steps += 1;
        if let Some(trigger) = self.trigger {
            if trigger.crossed(self.resolved()) {
                let hit = self.locate_hit(trigger, t0, dt)?;
                self.apply_hit(&hit)?;
                return Ok(Some(hit));
            }
        }
        self.check_invariants()?;
        self.track_phantoms();
        Ok(None)
    }

    /// Bisects the crossing step down to `dt_max` and interpolates inside it.
    fn locate_hit(&mut self, trigger: Trigger, t0: f64, dt: f64) -> Result<HitEvent> {
        self.restore(t0);
        let mut lo = t0;
        let mut width = dt;
        while width > self.opts.dt_max * (1.0 + 1e-9) {
            let half = width / 2.0;
            self.integrator.advance_quiet(&mut self.state, &self.system, half)?;
            if trigger.crossed(self.resolved()) {
                self.restore(lo);
            } else {
                lo += half;
                self.state.time = lo;
                self.save();
            }
            width = half;
        }
        let before = self.state.clone();
        self.integrator.advance_quiet(&mut self.state, &self.system, width)?;
        let (node, frac, mass) = match trigger.locate(&before, &self.state, &self.ready_idx) {
            Some(found) => found,
            None => {
                // rounding put the crossing at the very end of the step
                let node = self
                    .ready_idx
                    .iter()
                    .copied()
                    .max_by(|&a, &b| {
                        let da = self.state.mass_at(a) - before.mass_at(a);
                        let db = self.state.mass_at(b) - before.mass_at(b);
                        da.total_cmp(&db)
                    })
                    .ok_or_else(|| Error::InvariantBreach("threshold crossed without ready components".into()))?;
                (node, 1.0, self.state.mass_at(node))
            }
        };
        Ok(HitEvent {
            time: lo + frac * width,
            target: self.graph.nodes()[node].label,
            epoch: self.state.epoch,
            delivered_mass_at_hit: mass,
        })
    }

    fn apply_hit(&mut self, hit: &HitEvent) -> Result<()> {
        let target = self
            .graph
            .node_index(&hit.target)
            .ok_or(Error::UnknownComponent(hit.target))?;
        let blocking = RuleSet::for_mode(self.opts.mode).blocking;
        let bin = self.opts.rates.strong_cycle_time() / CROSSING_BINS_PER_CYCLE;
        for (time, label, weight) in weak_crossings(&self.graph, blocking, target, self.epoch_start, hit.time, bin) {
            self.log
                .push(Record::new(time, RecordKind::WeakCrossing, hit.epoch, &label, weight));
        }
        let realized = hit.target.realized();
        self.log.push(Record::new(
            hit.time,
            RecordKind::Hit,
            hit.epoch,
            &realized,
            hit.delivered_mass_at_hit,
        ));
        let next = collapse(&self.state, hit)?;
        if next.len() != 1 || next.components()[0].mass != 1.0 || next.components()[0].label.is_ready() {
            return Err(self.breach("collapse left more than one realized component"));
        }
        self.hits += 1;
        self.open_epoch(next.components()[0].label, next.time, next.epoch)
    }

    fn check_invariants(&mut self) -> Result<()> {
        let total = self.state.total_mass();
        let drift = (total - 1.0).abs();
        if drift.is_nan() || self.state.components().iter().any(|c| !(c.mass >= 0.0)) {
            return Err(self.breach("negative or undefined mass"));
        }
        self.max_drift = self.max_drift.max(drift);
        if drift > MASS_TOLERANCE {
            return Err(self.breach(&format!("total mass drifted by {drift:e}")));
        }
        Ok(())
    }

    fn breach(&self, what: &str) -> Error {
        let mut dump = format!(
            "{what} at t={} epoch={} (root {})",
            self.state.time,
            self.state.epoch,
            self.graph.root()
        );
        for c in self.state.components() {
            dump.push_str(&format!("\n  {}\t{}", c.label, c.mass));
        }
        Error::InvariantBreach(dump)
    }

    fn track_phantoms(&mut self) {
        for r in &self.ready {
            let mass = self.state.mass_at(r.node);
            let inflow = r.parent.map_or(0.0, |p| r.inflow_rate * self.state.mass_at(p));
            let label = self.graph.nodes()[r.node].label;
            let known = self.phantoms.iter().position(|p| p.label == label);
            match (mass > PHANTOM_MASS && inflow <= PHANTOM_MASS, known) {
                (true, None) => self.phantoms.push(PhantomRecord {
                    label,
                    mass_frozen: mass,
                    dormant_since: self.state.time,
                }),
                (false, Some(i)) => {
                    self.phantoms.remove(i);
                }
                _ => {}
            }
        }
    }
}

/// Posterior emission instants of every φ′ created on the path from the
/// epoch root to the hit target.
///
/// In a tree the mass of a node depends only on its ancestors, so the path
/// reduces to a chain whose nodes lose mass at their total outflow rate.
/// The weight of emission at `s` on edge `a → b` is the flux out of `a` at
/// `s` times the density of the flux from `b` reaching the target after the
/// remaining lag. Returns (time, label after the edge, normalized weight).
fn weak_crossings(
    graph: &EpochGraph,
    blocking: bool,
    target: usize,
    t_start: f64,
    t_hit: f64,
    bin: f64,
) -> Vec<(f64, ComponentLabel, f64)> {
    let path = graph.path_edges(target);
    if !path.iter().any(|&e| graph.edges()[e].kind == EdgeKind::WeakEmit) {
        return Vec::new();
    }
    let mut nodes = vec![0usize];
    nodes.extend(path.iter().map(|&e| graph.edge_ends()[e].1));
    let out_rate = |n: usize| -> f64 {
        graph
            .edge_ends()
            .iter()
            .zip(graph.edges())
            .filter(|(&(a, _), e)| a == n && !(blocking && is_blocked(&e.from, &e.to)))
            .map(|(_, e)| e.rate)
            .sum()
    };
    let chain = |lo: usize, hi: usize| -> DMatrix<f64> {
        // nodes[lo..=hi] with the path edges between them
        let n = hi - lo + 1;
        let mut a = DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            a[(i, i)] = -out_rate(nodes[lo + i]);
            if i + 1 < n {
                a[(i + 1, i)] = graph.edges()[path[lo + i]].rate;
            }
        }
        a
    };
    let span = t_hit - t_start;
    let bins = ((span / bin).ceil() as usize).max(1);
    let width = span / bins as f64;
    let last = nodes.len() - 1;

    let mut out = Vec::new();
    for (p, &e) in path.iter().enumerate() {
        let edge = graph.edges()[e];
        if edge.kind != EdgeKind::WeakEmit {
            continue;
        }
        let emitted = graph.nodes()[nodes[p + 1]].label;
        if p + 1 == last || span <= 0.0 {
            out.push((t_hit, emitted, 1.0));
            continue;
        }
        let up = sampled(&chain(0, p), width, bins, p);
        let down_last = last - 1 - (p + 1);
        let down = sampled(&chain(p + 1, last - 1), width, bins, down_last);
        let weights: Vec<f64> = (0..bins).map(|k| up[k] * down[bins - 1 - k]).collect();
        let total: f64 = weights.iter().sum();
        if !(total > 0.0 && total.is_finite()) {
            continue;
        }
        for (k, w) in weights.iter().enumerate() {
            let w = w / total;
            if w >= CROSSING_MIN_WEIGHT {
                out.push((t_start + (k as f64 + 0.5) * width, emitted, w));
            }
        }
    }
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    out
}

/// Component `pick` of exp(A τ) e₀ at τ = (k + ½)·width for k < bins.
fn sampled(a: &DMatrix<f64>, width: f64, bins: usize, pick: usize) -> Vec<f64> {
    let n = a.nrows();
    let half = (a * (width / 2.0)).exp();
    let full = (a * width).exp();
    let mut v: Vec<f64> = (0..n).map(|i| half[(i, 0)]).collect();
    let mut next = vec![0.0; n];
    let mut out = Vec::with_capacity(bins);
    for _ in 0..bins {
        out.push(v[pick].max(0.0));
        for (i, slot) in next.iter_mut().enumerate() {
            *slot = (0..n).map(|j| full[(i, j)] * v[j]).sum();
        }
        std::mem::swap(&mut v, &mut next);
    }
    out
}

/// Runs `count` trajectories of one ensemble to `t_end` in parallel and
/// returns their logs in trajectory order.
pub fn run_ensemble(opts: SimOptions, master_seed: u64, count: u64, t_end: f64) -> Result<Vec<EventLog>> {
    (0..count)
        .into_par_iter()
        .map(|i| {
            let mut t = Trajectory::seeded(opts, master_seed, i)?;
            t.run_until(t_end)?;
            Ok(t.into_log())
        })
        .collect()
}
