//! Epoch graphs for the V, Λ and the two cascade level schemes.
//!
//! Each scheme is a pairing of a strong cycle and a weak cycle. A cycle
//! either absorbs first and emits last (the excited level sits above the
//! ground level) or emits first and is pumped back last (the level sits
//! below ground):
//!
//! | scheme            | strong cycle | weak cycle   |
//! |-------------------|--------------|--------------|
//! | V                 | absorb first | absorb first |
//! | Λ                 | emit first   | emit first   |
//! | cascade, weak up  | emit first   | absorb first |
//! | cascade, weak down| absorb first | emit first   |
//!
//! The graph is a tree grown from the epoch root. The coherent sector is the
//! chain of weak cycles at the root's click count; every ground-level node
//! in it spawns a strong chain whose first emission lands in the detector
//! and is therefore ready, as is everything downstream of it. `depth` caps
//! the number of cycles opened on each track along any path; nodes where a
//! track was cut off form the frontier and can be grown lazily.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rustc_hash::FxHashMap;

use crate::dynamics::{EdgeKind, FlowEdge, RateSet};
use crate::error::{Error, Result};
use crate::rules::{is_decoherent, mark_ready};
use crate::state::{AtomLevel, ChainState, Component, ComponentLabel, Mode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LevelScheme {
    V,
    Lambda,
    CascadeWeakUp,
    CascadeWeakDown,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum CycleOrder {
    AbsorbFirst,
    EmitFirst,
}

impl LevelScheme {
    pub const ALL: [LevelScheme; 4] = [
        LevelScheme::V,
        LevelScheme::Lambda,
        LevelScheme::CascadeWeakUp,
        LevelScheme::CascadeWeakDown,
    ];

    fn strong_order(self) -> CycleOrder {
        match self {
            LevelScheme::V | LevelScheme::CascadeWeakDown => CycleOrder::AbsorbFirst,
            LevelScheme::Lambda | LevelScheme::CascadeWeakUp => CycleOrder::EmitFirst,
        }
    }

    fn weak_order(self) -> CycleOrder {
        match self {
            LevelScheme::V | LevelScheme::CascadeWeakUp => CycleOrder::AbsorbFirst,
            LevelScheme::Lambda | LevelScheme::CascadeWeakDown => CycleOrder::EmitFirst,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            LevelScheme::V => "v",
            LevelScheme::Lambda => "lambda",
            LevelScheme::CascadeWeakUp => "cascade_weak_up",
            LevelScheme::CascadeWeakDown => "cascade_weak_down",
        }
    }
}

impl fmt::Display for LevelScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LevelScheme {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "v" => Ok(LevelScheme::V),
            "lambda" | "λ" => Ok(LevelScheme::Lambda),
            "cascade_weak_up" => Ok(LevelScheme::CascadeWeakUp),
            "cascade_weak_down" => Ok(LevelScheme::CascadeWeakDown),
            other => Err(format!("unknown level scheme `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Lasers {
    StrongOnly,
    WeakOnly,
    Both,
}

impl Lasers {
    fn drives(self, track: Track) -> bool {
        match (self, track) {
            (Lasers::Both, _) => true,
            (Lasers::StrongOnly, Track::Strong) | (Lasers::WeakOnly, Track::Weak) => true,
            _ => false,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Lasers::StrongOnly => "strong_only",
            Lasers::WeakOnly => "weak_only",
            Lasers::Both => "both",
        }
    }
}

impl FromStr for Lasers {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "strong_only" => Ok(Lasers::StrongOnly),
            "weak_only" => Ok(Lasers::WeakOnly),
            "both" => Ok(Lasers::Both),
            other => Err(format!("unknown laser setting `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ConfigKind {
    pub scheme: LevelScheme,
    pub lasers: Lasers,
}

impl ConfigKind {
    pub fn both(scheme: LevelScheme) -> Self {
        ConfigKind {
            scheme,
            lasers: Lasers::Both,
        }
    }

    pub fn strong_only(scheme: LevelScheme) -> Self {
        ConfigKind {
            scheme,
            lasers: Lasers::StrongOnly,
        }
    }

    /// Whether hits can ever occur: only strong emissions reach the detector.
    pub fn records_clicks(&self) -> bool {
        self.lasers != Lasers::WeakOnly
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeakEdgePosition {
    TerminalInWeakCycle,
    InitialInWeakCycle,
}

/// Where φ′ is created inside a weak cycle.
pub fn weak_edge_position(kind: ConfigKind) -> WeakEdgePosition {
    match kind.scheme.weak_order() {
        CycleOrder::AbsorbFirst => WeakEdgePosition::TerminalInWeakCycle,
        CycleOrder::EmitFirst => WeakEdgePosition::InitialInWeakCycle,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Track {
    Strong = 0,
    Weak = 1,
}

#[derive(Debug, Clone)]
pub struct GraphNode {
    pub label: ComponentLabel,
    /// Index of the unique in-edge.
    pub parent_edge: Option<usize>,
    /// Cycles opened on the strong and weak tracks since the root.
    opened: [u32; 2],
    limit: u32,
}

#[derive(Debug, Clone)]
pub struct EpochGraph {
    kind: ConfigKind,
    rates: RateSet,
    nodes: Vec<GraphNode>,
    edges: Vec<FlowEdge>,
    ends: Vec<(usize, usize)>,
    index: FxHashMap<ComponentLabel, usize>,
    frontier: BTreeSet<usize>,
    record_blind: bool,
}

impl EpochGraph {
    pub fn kind(&self) -> ConfigKind {
        self.kind
    }

    pub fn rates(&self) -> RateSet {
        self.rates
    }

    pub fn root(&self) -> ComponentLabel {
        self.nodes[0].label
    }

    pub fn nodes(&self) -> &[GraphNode] {
        &self.nodes
    }

    pub fn labels(&self) -> impl Iterator<Item = ComponentLabel> + '_ {
        self.nodes.iter().map(|n| n.label)
    }

    pub fn edges(&self) -> &[FlowEdge] {
        &self.edges
    }

    /// (from, to) node indices of every edge.
    pub fn edge_ends(&self) -> &[(usize, usize)] {
        &self.ends
    }

    pub fn node_index(&self, label: &ComponentLabel) -> Option<usize> {
        self.index.get(label).copied()
    }

    pub fn frontier(&self) -> Vec<ComponentLabel> {
        self.frontier.iter().map(|&i| self.nodes[i].label).collect()
    }

    pub(crate) fn frontier_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.frontier.iter().copied()
    }

    /// True for the folded graph used when nothing can be recorded.
    pub fn is_record_blind(&self) -> bool {
        self.record_blind
    }

    pub fn ready_count(&self) -> usize {
        self.nodes.iter().filter(|n| n.label.is_ready()).count()
    }

    /// Edge indices from the root down to node `i`.
    pub fn path_edges(&self, mut i: usize) -> Vec<usize> {
        let mut path = Vec::new();
        while let Some(e) = self.nodes[i].parent_edge {
            path.push(e);
            i = self.ends[e].0;
        }
        path.reverse();
        path
    }

    /// A fresh state with unit mass on the root and every edge of the graph.
    pub fn to_state(&self, mode: Mode) -> ChainState {
        let mut state = ChainState::empty(mode);
        for (i, node) in self.nodes.iter().enumerate() {
            let mass = if i == 0 { 1.0 } else { 0.0 };
            state
                .insert(Component {
                    label: node.label,
                    mass,
                })
                .expect("graph labels are unique");
        }
        for e in &self.edges {
            state.add_edge(*e).expect("graph edges join graph nodes");
        }
        state
    }

    /// Grows the graph one more cycle past a frontier node. Returns the
    /// indices of the new nodes; new edges are appended after the old ones.
    pub fn extend(&mut self, label: &ComponentLabel) -> Result<Vec<usize>> {
        let i = match self.node_index(label) {
            Some(i) if self.frontier.contains(&i) => i,
            _ => return Err(Error::NotExtensible(*label)),
        };
        let before = self.nodes.len();
        self.nodes[i].limit += 1;
        self.expand(i);
        Ok((before..self.nodes.len()).collect())
    }

    fn opening(&self, from: ComponentLabel, track: Track) -> (ComponentLabel, EdgeKind, f64) {
        let r = self.rates;
        let mut to = from;
        match track {
            Track::Strong => {
                to.atom = AtomLevel::Strong1;
                match self.kind.scheme.strong_order() {
                    CycleOrder::AbsorbFirst => (to, EdgeKind::StrongAbsorb, r.strong_absorb),
                    CycleOrder::EmitFirst => {
                        to.photons.strong += 1;
                        to.detector.0 += 1;
                        (to, EdgeKind::StrongEmit, r.strong_emit)
                    }
                }
            }
            Track::Weak => {
                to.atom = AtomLevel::Weak2;
                match self.kind.scheme.weak_order() {
                    CycleOrder::AbsorbFirst => (to, EdgeKind::WeakAbsorb, r.weak_absorb),
                    CycleOrder::EmitFirst => {
                        to.photons.weak += 1;
                        (to, EdgeKind::WeakEmit, r.weak_emit)
                    }
                }
            }
        }
    }

    fn closing(&self, from: ComponentLabel, track: Track) -> (ComponentLabel, EdgeKind, f64) {
        let r = self.rates;
        let mut to = from;
        to.atom = AtomLevel::Ground0;
        match track {
            Track::Strong => match self.kind.scheme.strong_order() {
                CycleOrder::AbsorbFirst => {
                    to.photons.strong += 1;
                    to.detector.0 += 1;
                    (to, EdgeKind::StrongEmit, r.strong_emit)
                }
                CycleOrder::EmitFirst => (to, EdgeKind::StrongAbsorb, r.strong_absorb),
            },
            Track::Weak => match self.kind.scheme.weak_order() {
                CycleOrder::AbsorbFirst => {
                    to.photons.weak += 1;
                    (to, EdgeKind::WeakEmit, r.weak_emit)
                }
                CycleOrder::EmitFirst => (to, EdgeKind::WeakAbsorb, r.weak_absorb),
            },
        }
    }

    fn has_child_on(&self, i: usize, track: Track) -> bool {
        self.ends.iter().zip(&self.edges).any(|(&(a, _), e)| {
            a == i
                && match track {
                    Track::Strong => e.kind.is_strong(),
                    Track::Weak => e.kind.is_weak(),
                }
        })
    }

    fn add_child(&mut self, parent: usize, child: ComponentLabel, kind: EdgeKind, rate: f64, opened: [u32; 2]) -> usize {
        let parent_label = self.nodes[parent].label;
        let child = mark_ready(&parent_label, &child, is_decoherent(&parent_label, &child));
        debug_assert!(!self.index.contains_key(&child), "epoch graphs are trees");
        let edge = FlowEdge::new(parent_label, child, rate, kind).expect("builder edges are consistent");
        let c = self.nodes.len();
        self.edges.push(edge);
        self.ends.push((parent, c));
        self.nodes.push(GraphNode {
            label: child,
            parent_edge: Some(self.edges.len() - 1),
            opened,
            limit: self.nodes[parent].limit,
        });
        self.index.insert(child, c);
        c
    }

    fn expand(&mut self, i: usize) {
        let node = self.nodes[i].clone();
        let label = node.label;
        match label.atom {
            AtomLevel::Ground0 => {
                let mut cut = false;
                for track in [Track::Strong, Track::Weak] {
                    if !self.kind.lasers.drives(track) {
                        continue;
                    }
                    // ready chains only continue along the strong line
                    if track == Track::Weak && label.is_ready() {
                        continue;
                    }
                    if node.opened[track as usize] >= node.limit {
                        cut = true;
                        continue;
                    }
                    if self.has_child_on(i, track) {
                        continue;
                    }
                    let (child, kind, rate) = self.opening(label, track);
                    let mut opened = node.opened;
                    opened[track as usize] += 1;
                    let c = self.add_child(i, child, kind, rate, opened);
                    self.expand(c);
                }
                if cut {
                    self.frontier.insert(i);
                } else {
                    self.frontier.remove(&i);
                }
            }
            AtomLevel::Strong1 | AtomLevel::Weak2 => {
                let track = if label.atom == AtomLevel::Strong1 {
                    Track::Strong
                } else {
                    Track::Weak
                };
                if !self.kind.lasers.drives(track) || self.has_child_on(i, track) {
                    return;
                }
                let (child, kind, rate) = self.closing(label, track);
                let c = self.add_child(i, child, kind, rate, node.opened);
                self.expand(c);
            }
        }
    }
}

/// Builds the epoch graph grown from `root`, with at most `depth` cycles
/// opened on each track along any path.
pub fn build_epoch(kind: ConfigKind, root: ComponentLabel, rates: RateSet, depth: u32) -> Result<EpochGraph> {
    if depth < 1 {
        return Err(Error::InvalidDepth(depth));
    }
    rates.validate()?;
    let mut graph = EpochGraph {
        kind,
        rates,
        nodes: vec![GraphNode {
            label: root,
            parent_edge: None,
            opened: [0, 0],
            limit: depth,
        }],
        edges: Vec::new(),
        ends: Vec::new(),
        index: FxHashMap::from_iter([(root, 0)]),
        frontier: BTreeSet::new(),
        record_blind: false,
    };
    graph.expand(0);
    Ok(graph)
}

/// Value-returning form of [`EpochGraph::extend`].
pub fn extend_frontier(mut graph: EpochGraph, label: &ComponentLabel) -> Result<EpochGraph> {
    graph.extend(label)?;
    Ok(graph)
}

/// The atom's three levels at the root's record counts, joined by the
/// laser and decay transitions as a closed loop.
///
/// When no collapse can ever happen the records carried by the labels are
/// never read, and the unbounded chain folds onto this finite graph. The
/// result is cyclic and carries only coherent-sector edges.
pub fn build_record_blind(kind: ConfigKind, root: ComponentLabel, rates: RateSet) -> Result<EpochGraph> {
    rates.validate()?;
    let base = root.realized();
    let mut levels = vec![AtomLevel::Ground0];
    if kind.lasers.drives(Track::Strong) {
        levels.push(AtomLevel::Strong1);
    }
    if kind.lasers.drives(Track::Weak) {
        levels.push(AtomLevel::Weak2);
    }
    if !levels.contains(&base.atom) {
        levels.push(base.atom);
    }
    // root first
    levels.sort_by_key(|&a| a != base.atom);
    let mut graph = EpochGraph {
        kind,
        rates,
        nodes: Vec::new(),
        edges: Vec::new(),
        ends: Vec::new(),
        index: FxHashMap::default(),
        frontier: BTreeSet::new(),
        record_blind: true,
    };
    for atom in levels {
        let label = base.with_atom(atom);
        graph.index.insert(label, graph.nodes.len());
        graph.nodes.push(GraphNode {
            label,
            parent_edge: None,
            opened: [0, 0],
            limit: 0,
        });
    }
    let ground = base.with_atom(AtomLevel::Ground0);
    let mut link = |from: ComponentLabel, to: ComponentLabel, rate: f64| {
        let (Some(a), Some(b)) = (graph.index.get(&from).copied(), graph.index.get(&to).copied()) else {
            return;
        };
        graph
            .edges
            .push(FlowEdge::new(from, to, rate, EdgeKind::CoherentSector).expect("same records"));
        graph.ends.push((a, b));
    };
    if kind.lasers.drives(Track::Strong) {
        let upper = base.with_atom(AtomLevel::Strong1);
        let (out, back) = match kind.scheme.strong_order() {
            CycleOrder::AbsorbFirst => (rates.strong_absorb, rates.strong_emit),
            CycleOrder::EmitFirst => (rates.strong_emit, rates.strong_absorb),
        };
        link(ground, upper, out);
        link(upper, ground, back);
    }
    if kind.lasers.drives(Track::Weak) {
        let weak = base.with_atom(AtomLevel::Weak2);
        let (out, back) = match kind.scheme.weak_order() {
            CycleOrder::AbsorbFirst => (rates.weak_absorb, rates.weak_emit),
            CycleOrder::EmitFirst => (rates.weak_emit, rates.weak_absorb),
        };
        link(ground, weak, out);
        link(weak, ground, back);
    }
    Ok(graph)
}
