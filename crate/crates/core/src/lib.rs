//! Deterministic packet-level simulator for proactive wireless multi-hop
//! routing: DSDV, FSR and OLSR over a unit-disk broadcast medium with
//! random-waypoint mobility and CBR traffic.
//!
//! The usual entry point is [`experiment::run_scenario`] with a
//! [`config::ScenarioConfig`]; [`sim::Simulation`] exposes the engine for
//! step-by-step inspection.

use std::fmt;

pub mod analytics;
pub mod audit;
pub mod config;
pub mod dsdv;
pub mod experiment;
pub mod fsr;
pub mod kernel;
pub mod mobility;
pub mod mpr;
pub mod olsr;
pub mod protocol;
pub mod radio;
pub mod rng;
pub mod routing;
pub mod sim;
pub mod traffic;
pub mod wire;

/// Identifier of a simulated node; nodes are numbered `0..n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub u32);

impl NodeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

pub use config::{Preset, ProtocolKind, ScenarioConfig};
pub use experiment::{run_scenario, RunOutput};
pub use kernel::SimTime;
