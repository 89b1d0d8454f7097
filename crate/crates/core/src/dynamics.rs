//! Probability-mass transport over the component graph.
//!
//! Every edge moves mass by first-order kinetics, `dm_to/dt += rate · m_from`.
//! The integrator propagates the linear system exactly: for a step `h` it
//! uses `exp(A h)` together with the occupancy integral `∫₀ʰ exp(A s) ds`,
//! both read off one exponential of the augmented matrix `[[A, I], [0, 0]]`.
//! The occupancy integral gives the mass carried by each edge during the
//! step without any quadrature error.
//!
//! Compiled systems are keyed by shape (local node count, local edge list
//! and rates), so the isomorphic graphs that every epoch rebuilds share
//! their propagators.

use std::collections::HashMap;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::state::{ChainState, ComponentLabel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EdgeKind {
    StrongAbsorb,
    StrongEmit,
    WeakAbsorb,
    WeakEmit,
    /// Transfer inside a coherent sector that records nothing.
    CoherentSector,
}

impl EdgeKind {
    pub fn is_weak(self) -> bool {
        matches!(self, EdgeKind::WeakAbsorb | EdgeKind::WeakEmit)
    }

    pub fn is_strong(self) -> bool {
        matches!(self, EdgeKind::StrongAbsorb | EdgeKind::StrongEmit)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowEdge {
    pub from: ComponentLabel,
    pub to: ComponentLabel,
    pub rate: f64,
    pub kind: EdgeKind,
}

impl FlowEdge {
    /// Validates the rate and the ledger change implied by `kind`.
    pub fn new(from: ComponentLabel, to: ComponentLabel, rate: f64, kind: EdgeKind) -> Result<Self> {
        if !(rate > 0.0 && rate.is_finite()) {
            return Err(Error::InvalidEdge(format!("rate {rate} on {from} -> {to}")));
        }
        if from == to {
            return Err(Error::InvalidEdge(format!("self loop on {from}")));
        }
        let (fp, tp) = (from.photons, to.photons);
        let ledger_ok = match kind {
            EdgeKind::WeakEmit => {
                tp.weak == fp.weak + 1 && tp.strong == fp.strong && to.clicks() == from.clicks()
            }
            EdgeKind::StrongEmit => {
                tp.strong == fp.strong + 1 && tp.weak == fp.weak && to.clicks() == from.clicks() + 1
            }
            EdgeKind::StrongAbsorb | EdgeKind::WeakAbsorb | EdgeKind::CoherentSector => {
                tp == fp && to.clicks() == from.clicks()
            }
        };
        if !ledger_ok {
            return Err(Error::InvalidEdge(format!(
                "{kind:?} edge {from} -> {to} changes the ledger inconsistently"
            )));
        }
        Ok(FlowEdge {
            from,
            to,
            rate,
            kind,
        })
    }
}

/// Transition rates in units of the strong decay rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateSet {
    pub strong_absorb: f64,
    pub strong_emit: f64,
    pub weak_absorb: f64,
    pub weak_emit: f64,
}

impl Default for RateSet {
    /// Desk-scale defaults: weak line 10⁻³ of the strong line.
    fn default() -> Self {
        RateSet {
            strong_absorb: 1.0,
            strong_emit: 1.0,
            weak_absorb: 1e-3,
            weak_emit: 1e-3,
        }
    }
}

impl RateSet {
    /// Lifetimes of 10⁻⁸ s and 2 s: a weak/strong ratio of 5×10⁻⁹.
    pub fn physical() -> Self {
        let ratio = 1e-8 / 2.0;
        RateSet {
            strong_absorb: 1.0,
            strong_emit: 1.0,
            weak_absorb: ratio,
            weak_emit: ratio,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, r) in [
            ("k_strong_absorb", self.strong_absorb),
            ("k_strong_emit", self.strong_emit),
            ("k_weak_absorb", self.weak_absorb),
            ("k_weak_emit", self.weak_emit),
        ] {
            if !(r > 0.0 && r.is_finite()) {
                return Err(Error::InvalidRates(format!("{name} = {r}")));
            }
        }
        Ok(())
    }

    /// Mean duration of one strong absorb/emit cycle.
    pub fn strong_cycle_time(&self) -> f64 {
        1.0 / self.strong_absorb + 1.0 / self.strong_emit
    }

    /// Mean duration of one weak absorb/emit cycle.
    pub fn weak_cycle_time(&self) -> f64 {
        1.0 / self.weak_absorb + 1.0 / self.weak_emit
    }

    pub fn max_rate(&self) -> f64 {
        self.strong_absorb
            .max(self.strong_emit)
            .max(self.weak_absorb)
            .max(self.weak_emit)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeFlow {
    pub edge: FlowEdge,
    /// Mass carried across the edge during the step.
    pub transported: f64,
    /// Step-averaged current, `transported / dt` = rate × mean source mass.
    pub current: f64,
}

/// Currents over one integrator step.
#[derive(Debug, Clone, Default)]
pub struct CurrentReport {
    /// Start of the step.
    pub time: f64,
    pub dt: f64,
    pub flows: Vec<EdgeFlow>,
    /// Net inflow current Σ J_in − Σ J_out of every component in the state.
    pub inflow: Vec<(ComponentLabel, f64)>,
}

impl CurrentReport {
    pub fn flow_on(&self, from: &ComponentLabel, to: &ComponentLabel) -> Option<&EdgeFlow> {
        self.flows
            .iter()
            .find(|f| f.edge.from == *from && f.edge.to == *to)
    }
}

/// Net positive inflow current into `target`.
pub fn currents_into(report: &CurrentReport, target: &ComponentLabel) -> Result<f64> {
    report
        .inflow
        .iter()
        .find(|(label, _)| label == target)
        .map(|&(_, net)| net.max(0.0))
        .ok_or(Error::UnknownComponent(*target))
}

struct Propagator {
    dt_bits: u64,
    /// exp(A dt), row-major.
    transition: Vec<f64>,
    /// ∫₀^dt exp(A s) ds, row-major.
    occupancy: Vec<f64>,
}

impl Propagator {
    fn new(generator: &DMatrix<f64>, dt: f64) -> Self {
        let n = generator.nrows();
        let mut augmented = DMatrix::<f64>::zeros(2 * n, 2 * n);
        for i in 0..n {
            for j in 0..n {
                augmented[(i, j)] = generator[(i, j)] * dt;
            }
            augmented[(i, n + i)] = dt;
        }
        let exp = augmented.exp();
        let mut transition = Vec::with_capacity(n * n);
        let mut occupancy = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                transition.push(exp[(i, j)]);
                occupancy.push(exp[(i, n + j)]);
            }
        }
        Propagator {
            dt_bits: dt.to_bits(),
            transition,
            occupancy,
        }
    }
}

struct Shape {
    generator: DMatrix<f64>,
    propagators: Vec<Propagator>,
}

type ShapeKey = (usize, Vec<(u32, u32, u64)>);

/// A fixed set of active edges compiled against a state's component indices.
#[derive(Debug, Clone)]
pub struct ActiveSystem {
    /// State component index of each local node.
    nodes: Vec<usize>,
    /// (local from, local to, rate)
    local_edges: Vec<(usize, usize, f64)>,
    edges: Vec<FlowEdge>,
    shape: usize,
}

impl ActiveSystem {
    pub fn edges(&self) -> &[FlowEdge] {
        &self.edges
    }

    /// State component indices touched by the active edges.
    pub fn nodes(&self) -> &[usize] {
        &self.nodes
    }

    /// dm/dt for every component in `state` (zero off the active nodes).
    pub fn mass_derivative(&self, state: &ChainState) -> Vec<f64> {
        let mut d = vec![0.0; state.len()];
        for &(a, b, rate) in &self.local_edges {
            let j = rate * state.mass_at(self.nodes[a]);
            d[self.nodes[a]] -= j;
            d[self.nodes[b]] += j;
        }
        d
    }
}

/// Exact linear-kinetics integrator with a propagator cache.
#[derive(Default)]
pub struct Integrator {
    keys: HashMap<ShapeKey, usize>,
    shapes: Vec<Shape>,
    masses: Vec<f64>,
    next: Vec<f64>,
    occupancy: Vec<f64>,
}

impl Integrator {
    pub fn new() -> Self {
        Self::default()
    }

    /// Number of distinct graph shapes compiled so far.
    pub fn shape_count(&self) -> usize {
        self.shapes.len()
    }

    pub fn compile(&mut self, state: &ChainState, edges: &[FlowEdge]) -> Result<ActiveSystem> {
        let mut global = Vec::with_capacity(edges.len());
        for e in edges {
            let a = state.index_of(&e.from).ok_or(Error::UnknownComponent(e.from))?;
            let b = state.index_of(&e.to).ok_or(Error::UnknownComponent(e.to))?;
            global.push((a, b, e.rate));
        }
        let mut nodes: Vec<usize> = global.iter().flat_map(|&(a, b, _)| [a, b]).collect();
        nodes.sort_unstable();
        nodes.dedup();
        let local = |g: usize| nodes.binary_search(&g).expect("node collected above");
        let local_edges: Vec<(usize, usize, f64)> = global
            .iter()
            .map(|&(a, b, rate)| (local(a), local(b), rate))
            .collect();

        let key: ShapeKey = (
            nodes.len(),
            local_edges
                .iter()
                .map(|&(a, b, r)| (a as u32, b as u32, r.to_bits()))
                .collect(),
        );
        let shape = match self.keys.get(&key) {
            Some(&id) => id,
            None => {
                let n = nodes.len();
                let mut generator = DMatrix::<f64>::zeros(n, n);
                for &(a, b, rate) in &local_edges {
                    generator[(b, a)] += rate;
                    generator[(a, a)] -= rate;
                }
                self.shapes.push(Shape {
                    generator,
                    propagators: Vec::new(),
                });
                self.keys.insert(key, self.shapes.len() - 1);
                self.shapes.len() - 1
            }
        };
        Ok(ActiveSystem {
            nodes,
            local_edges,
            edges: edges.to_vec(),
            shape,
        })
    }

    fn propagator(&mut self, shape: usize, dt: f64) -> &Propagator {
        let shape = &mut self.shapes[shape];
        let bits = dt.to_bits();
        let pos = match shape.propagators.iter().position(|p| p.dt_bits == bits) {
            Some(pos) => pos,
            None => {
                shape.propagators.push(Propagator::new(&shape.generator, dt));
                shape.propagators.len() - 1
            }
        };
        &shape.propagators[pos]
    }

    /// Advances `state` by `dt` along the compiled active edges and fills
    /// `report` with the per-edge transport of the step.
    pub fn advance(
        &mut self,
        state: &mut ChainState,
        system: &ActiveSystem,
        dt: f64,
        report: &mut CurrentReport,
    ) -> Result<()> {
        self.advance_masses(state, system, dt)?;
        report.time = state.time;
        report.dt = dt;
        report.flows.clear();
        let mut net = vec![0.0; state.len()];
        for (edge, &(a, b, rate)) in system.edges.iter().zip(&system.local_edges) {
            let transported = rate * self.occupancy[a];
            net[system.nodes[a]] -= transported;
            net[system.nodes[b]] += transported;
            report.flows.push(EdgeFlow {
                edge: *edge,
                transported,
                current: transported / dt,
            });
        }
        report.inflow.clear();
        report.inflow.extend(
            state
                .components()
                .iter()
                .zip(net)
                .map(|(c, n)| (c.label, n / dt)),
        );
        state.time += dt;
        Ok(())
    }

    /// Mass-only variant of [`Integrator::advance`] without a report.
    pub fn advance_quiet(&mut self, state: &mut ChainState, system: &ActiveSystem, dt: f64) -> Result<()> {
        self.advance_masses(state, system, dt)?;
        state.time += dt;
        Ok(())
    }

    fn advance_masses(&mut self, state: &mut ChainState, system: &ActiveSystem, dt: f64) -> Result<()> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidStep(dt));
        }
        let n = system.nodes.len();
        if n == 0 {
            return Ok(());
        }
        let mut masses = std::mem::take(&mut self.masses);
        let mut next = std::mem::take(&mut self.next);
        let mut occupancy = std::mem::take(&mut self.occupancy);
        masses.clear();
        masses.extend(system.nodes.iter().map(|&g| state.mass_at(g)));
        next.clear();
        next.resize(n, 0.0);
        occupancy.clear();
        occupancy.resize(n, 0.0);

        let prop = self.propagator(system.shape, dt);
        for i in 0..n {
            let row = &prop.transition[i * n..(i + 1) * n];
            let occ = &prop.occupancy[i * n..(i + 1) * n];
            let mut m = 0.0;
            let mut o = 0.0;
            for j in 0..n {
                m += row[j] * masses[j];
                o += occ[j] * masses[j];
            }
            next[i] = m;
            occupancy[i] = o;
        }
        for (i, &g) in system.nodes.iter().enumerate() {
            // exp of a Metzler matrix is nonnegative; only rounding can dip below zero
            state.set_mass_at(g, next[i].max(0.0));
        }
        self.masses = masses;
        self.next = next;
        self.occupancy = occupancy;
        Ok(())
    }
}

/// One transport step along `edges`, which must already exclude blocked
/// edges. Returns the advanced state and the step's currents.
pub fn step(state: &ChainState, edges: &[FlowEdge], dt: f64) -> Result<(ChainState, CurrentReport)> {
    let mut integrator = Integrator::new();
    let system = integrator.compile(state, edges)?;
    let mut next = state.clone();
    let mut report = CurrentReport::default();
    integrator.advance(&mut next, &system, dt, &mut report)?;
    Ok((next, report))
}

pub mod oracle {
    //! Brute-force reference integration used to check [`super::step`].

    use super::*;

    /// Fine fixed-step RK4 integration over `t`, with a step of 10⁻⁴ of the
    /// fastest timescale. Only acyclic edge sets are supported.
    pub fn integrate_exact_oracle(state: &ChainState, edges: &[FlowEdge], t: f64) -> Result<ChainState> {
        let n = state.len();
        let mut idx = Vec::with_capacity(edges.len());
        for e in edges {
            let a = state.index_of(&e.from).ok_or(Error::UnknownComponent(e.from))?;
            let b = state.index_of(&e.to).ok_or(Error::UnknownComponent(e.to))?;
            idx.push((a, b, e.rate));
        }
        if !is_acyclic(n, &idx) {
            return Err(Error::OracleUnsupported);
        }
        if !(t >= 0.0 && t.is_finite()) {
            return Err(Error::InvalidStep(t));
        }
        let mut out = state.clone();
        if t == 0.0 || idx.is_empty() {
            out.time += t;
            return Ok(out);
        }
        let max_rate = idx.iter().map(|e| e.2).fold(0.0, f64::max);
        let steps = (t * max_rate / 1e-4).ceil() as usize;
        let h = t / steps as f64;

        let deriv = |m: &[f64], d: &mut [f64]| {
            d.iter_mut().for_each(|x| *x = 0.0);
            for &(a, b, rate) in &idx {
                let j = rate * m[a];
                d[a] -= j;
                d[b] += j;
            }
        };
        let mut m: Vec<f64> = state.components().iter().map(|c| c.mass).collect();
        let (mut k1, mut k2, mut k3, mut k4) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
        let mut tmp = vec![0.0; n];
        for _ in 0..steps {
            deriv(&m, &mut k1);
            for i in 0..n {
                tmp[i] = m[i] + 0.5 * h * k1[i];
            }
            deriv(&tmp, &mut k2);
            for i in 0..n {
                tmp[i] = m[i] + 0.5 * h * k2[i];
            }
            deriv(&tmp, &mut k3);
            for i in 0..n {
                tmp[i] = m[i] + h * k3[i];
            }
            deriv(&tmp, &mut k4);
            for i in 0..n {
                m[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
        }
        for (i, mass) in m.into_iter().enumerate() {
            out.set_mass_at(i, mass);
        }
        out.time += t;
        Ok(out)
    }

    fn is_acyclic(n: usize, edges: &[(usize, usize, f64)]) -> bool {
        let mut indegree = vec![0usize; n];
        let mut out: Vec<Vec<usize>> = vec![Vec::new(); n];
        for &(a, b, _) in edges {
            indegree[b] += 1;
            out[a].push(b);
        }
        let mut queue: Vec<usize> = (0..n).filter(|&i| indegree[i] == 0).collect();
        let mut seen = 0;
        while let Some(v) = queue.pop() {
            seen += 1;
            for &w in &out[v] {
                indegree[w] -= 1;
                if indegree[w] == 0 {
                    queue.push(w);
                }
            }
        }
        seen == n
    }
}
