//! Collapse-rule simulator for a driven three-level atom.
//!
//! A single atom is driven on a fast strong transition and a slow weak one.
//! Its state is a chain of labelled components whose square moduli flow
//! along first-order decay and excitation edges. Components become *ready*
//! once a photon has reached the detector, flow between ready components
//! stalls, and a stochastic trigger collapses the chain onto one ready
//! component in proportion to the mass delivered there. Repeated collapses
//! produce the bright and dark periods of fluorescent telegraph pulsing.

pub mod analysis;
pub mod cli;
pub mod configurations;
pub mod dynamics;
pub mod log;
pub mod error;
pub mod rules;
pub mod simulate;
pub mod state;

pub use configurations::{build_epoch, extend_frontier, ConfigKind, EpochGraph, Lasers, LevelScheme};
pub use dynamics::{step, CurrentReport, EdgeKind, FlowEdge, Integrator, RateSet};
pub use error::{Error, Result};
pub use rules::{collapse, HitEvent, RuleSet, Trigger};
pub use state::{AtomLevel, ChainState, Component, ComponentLabel, Mode};
pub use log::{EventLog, Record, RecordKind};
pub use simulate::{run_ensemble, trajectory_rng, SimOptions, Trajectory};
pub use analysis::{classify_weak_timing, interval_stats, segment_telegraph, TelegraphSegmentation, TimingWindows};
pub use cli::{parse_config, run, ConfigError, RunConfig, RunError};
