//! Component labels and the chain state Φ(t).
//!
//! A component is one additive term of the atom/detector superposition,
//! identified by the atomic level, the detector click count, the photon
//! ledger and the ready marks. Only square moduli are tracked; phases never
//! enter any of the collapse rules.

use std::fmt;

use rustc_hash::FxHashMap;

use crate::dynamics::FlowEdge;
use crate::error::{Error, Result};

/// Tolerance on Σ mass between collapses.
pub const MASS_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AtomLevel {
    Ground0,
    Strong1,
    Weak2,
}

impl AtomLevel {
    pub fn index(self) -> u8 {
        match self {
            AtomLevel::Ground0 => 0,
            AtomLevel::Strong1 => 1,
            AtomLevel::Weak2 => 2,
        }
    }

    pub fn from_index(index: u8) -> Option<Self> {
        match index {
            0 => Some(AtomLevel::Ground0),
            1 => Some(AtomLevel::Strong1),
            2 => Some(AtomLevel::Weak2),
            _ => None,
        }
    }
}

/// Photons emitted so far: φ on the strong line, φ′ on the weak line.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PhotonLedger {
    pub strong: u32,
    pub weak: u32,
}

/// Number of φ photons recorded by the detector.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DetectorCount(pub u32);

/// Underline marks: which objects of the component are ready states.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ReadyMarks {
    pub atom: bool,
    pub detector: bool,
}

impl ReadyMarks {
    pub const NONE: ReadyMarks = ReadyMarks {
        atom: false,
        detector: false,
    };
    pub const BOTH: ReadyMarks = ReadyMarks {
        atom: true,
        detector: true,
    };

    pub fn any(self) -> bool {
        self.atom || self.detector
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ComponentLabel {
    pub atom: AtomLevel,
    pub detector: DetectorCount,
    pub photons: PhotonLedger,
    pub ready: ReadyMarks,
}

impl ComponentLabel {
    /// A₀⊗D₀ with an empty ledger.
    pub fn ground() -> Self {
        ComponentLabel {
            atom: AtomLevel::Ground0,
            detector: DetectorCount(0),
            photons: PhotonLedger::default(),
            ready: ReadyMarks::NONE,
        }
    }

    pub fn clicks(&self) -> u32 {
        self.detector.0
    }

    pub fn is_ready(&self) -> bool {
        self.ready.any()
    }

    /// The same label with every ready mark cleared.
    pub fn realized(mut self) -> Self {
        self.ready = ReadyMarks::NONE;
        self
    }

    pub fn with_atom(mut self, atom: AtomLevel) -> Self {
        self.atom = atom;
        self
    }

    pub fn with_ready(mut self, ready: ReadyMarks) -> Self {
        self.ready = ready;
        self
    }
}

impl fmt::Display for ComponentLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        const UNDERLINE: char = '\u{332}';
        write!(f, "A")?;
        if self.ready.atom {
            write!(f, "{UNDERLINE}")?;
        }
        write!(f, "{}", self.atom.index())?;
        for _ in 0..self.photons.weak {
            write!(f, "φ′")?;
        }
        write!(f, "⊗D")?;
        if self.ready.detector {
            write!(f, "{UNDERLINE}")?;
        }
        write!(f, "{}", self.detector.0)?;
        if self.photons.strong != self.detector.0 {
            write!(f, "[φ×{}]", self.photons.strong)?;
        }
        Ok(())
    }
}

fn count(name: &str, value: i64) -> Result<u32> {
    u32::try_from(value).map_err(|_| Error::InvalidLabel(format!("{name} count {value}")))
}

/// Builds a label from raw counts, rejecting negative ones.
pub fn make_label(
    atom: AtomLevel,
    clicks: i64,
    strong: i64,
    weak: i64,
    ready: ReadyMarks,
) -> Result<ComponentLabel> {
    Ok(ComponentLabel {
        atom,
        detector: DetectorCount(count("click", clicks)?),
        photons: PhotonLedger {
            strong: count("strong photon", strong)?,
            weak: count("weak photon", weak)?,
        },
        ready,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Component {
    pub label: ComponentLabel,
    /// Square modulus |c|².
    pub mass: f64,
}

/// Which rule set governs collapse.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Mode {
    #[default]
    NuRules,
    OriginalWithObserver,
    OriginalNoObserver,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::NuRules => "nurules",
            Mode::OriginalWithObserver => "original_with_observer",
            Mode::OriginalNoObserver => "original_no_observer",
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "nurules" => Ok(Mode::NuRules),
            "original_with_observer" => Ok(Mode::OriginalWithObserver),
            "original_no_observer" => Ok(Mode::OriginalNoObserver),
            other => Err(format!("unknown mode `{other}`")),
        }
    }
}

/// The full system state: components, the flow edges between them, and the
/// epoch bookkeeping.
#[derive(Debug, Clone)]
pub struct ChainState {
    components: Vec<Component>,
    index: FxHashMap<ComponentLabel, usize>,
    edges: Vec<FlowEdge>,
    pub time: f64,
    pub epoch: u64,
    pub mode: Mode,
}

impl ChainState {
    /// A state holding a single component of unit mass.
    pub fn new(root: ComponentLabel, mode: Mode) -> Self {
        let mut state = ChainState::empty(mode);
        state.components.push(Component {
            label: root,
            mass: 1.0,
        });
        state.index.insert(root, 0);
        state
    }

    pub fn empty(mode: Mode) -> Self {
        ChainState {
            components: Vec::new(),
            index: FxHashMap::default(),
            edges: Vec::new(),
            time: 0.0,
            epoch: 0,
            mode,
        }
    }

    pub fn insert(&mut self, component: Component) -> Result<usize> {
        if self.index.contains_key(&component.label) {
            return Err(Error::DuplicateLabel(component.label));
        }
        let idx = self.components.len();
        self.index.insert(component.label, idx);
        self.components.push(component);
        Ok(idx)
    }

    pub fn add_edge(&mut self, edge: FlowEdge) -> Result<()> {
        for end in [edge.from, edge.to] {
            if !self.index.contains_key(&end) {
                return Err(Error::UnknownComponent(end));
            }
        }
        self.edges.push(edge);
        Ok(())
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    pub fn edges(&self) -> &[FlowEdge] {
        &self.edges
    }

    pub fn index_of(&self, label: &ComponentLabel) -> Option<usize> {
        self.index.get(label).copied()
    }

    pub fn mass_of(&self, label: &ComponentLabel) -> Option<f64> {
        self.index_of(label).map(|i| self.components[i].mass)
    }

    pub fn set_mass(&mut self, label: &ComponentLabel, mass: f64) -> Result<()> {
        let i = self.index_of(label).ok_or(Error::UnknownComponent(*label))?;
        self.components[i].mass = mass;
        Ok(())
    }

    pub(crate) fn mass_at(&self, i: usize) -> f64 {
        self.components[i].mass
    }

    pub(crate) fn set_mass_at(&mut self, i: usize, mass: f64) {
        self.components[i].mass = mass;
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    /// Σ mass over all components.
    pub fn total_mass(&self) -> f64 {
        total_mass(self)
    }

    /// Components with positive mass.
    pub fn surviving(&self) -> impl Iterator<Item = &Component> {
        self.components.iter().filter(|c| c.mass > 0.0)
    }
}

pub fn total_mass(state: &ChainState) -> f64 {
    state.components.iter().map(|c| c.mass).sum()
}

/// Label of the sole surviving component right after a collapse, with its
/// ready marks cleared.
pub fn label_of_realized(state: &ChainState) -> Result<ComponentLabel> {
    let mut surviving = state.surviving();
    match (surviving.next(), surviving.next()) {
        (Some(c), None) => Ok(c.label.realized()),
        (None, _) => Err(Error::NotCollapsed(0)),
        (Some(_), Some(_)) => Err(Error::NotCollapsed(state.surviving().count())),
    }
}
