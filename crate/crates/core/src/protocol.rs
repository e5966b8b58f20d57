//! The interface between the engine and a node's routing protocol.
//!
//! Protocols never touch the event queue or the radio directly. Each
//! callback records what the node wants to happen in an [`Effects`] buffer,
//! which the engine then applies. This keeps protocol logic testable in
//! isolation.

use crate::kernel::SimTime;
use crate::routing::RouteTable;
use crate::wire::ControlPacket;
use crate::NodeId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Timer {
    /// End of one link-state interval.
    LinkTick,
    DsdvPeriodic,
    DsdvTrigger,
    FsrInner,
    FsrOuter,
    OlsrHello,
    OlsrTc,
    OlsrTriggerTc,
}

/// Why a control packet was transmitted; the unit of overhead accounting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ControlKind {
    DsdvPeriodic,
    DsdvTrigger,
    FsrInner,
    FsrOuter,
    Hello,
    TcPeriodic,
    TcTrigger,
    TcForward,
}

impl ControlKind {
    pub const ALL: [ControlKind; 8] = [
        ControlKind::DsdvPeriodic,
        ControlKind::DsdvTrigger,
        ControlKind::FsrInner,
        ControlKind::FsrOuter,
        ControlKind::Hello,
        ControlKind::TcPeriodic,
        ControlKind::TcTrigger,
        ControlKind::TcForward,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ControlKind::DsdvPeriodic => "dsdv-periodic",
            ControlKind::DsdvTrigger => "dsdv-trigger",
            ControlKind::FsrInner => "fsr-inner",
            ControlKind::FsrOuter => "fsr-outer",
            ControlKind::Hello => "hello",
            ControlKind::TcPeriodic => "tc-periodic",
            ControlKind::TcTrigger => "tc-trigger",
            ControlKind::TcForward => "tc-forward",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        ControlKind::ALL.into_iter().find(|k| k.as_str() == s)
    }

    /// True for transmissions that originate a message rather than relay one.
    pub fn is_origination(self) -> bool {
        self != ControlKind::TcForward
    }
}

/// Protocol-level observations surfaced for metrics and analytic comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Note {
    /// Selector-bearing status of a node at one of its periodic TC ticks.
    SelectorCensus { selectors: usize },
    MprChange,
    /// A broken link carried at least one active route.
    ActiveRouteBreak,
    MalformedUpdate,
}

#[derive(Debug, Default)]
pub struct Effects {
    pub broadcasts: Vec<(ControlPacket, ControlKind)>,
    /// Absolute fire times.
    pub timers: Vec<(SimTime, Timer)>,
    pub notes: Vec<Note>,
}

impl Effects {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn broadcast(&mut self, packet: ControlPacket, kind: ControlKind) {
        self.broadcasts.push((packet, kind));
    }

    pub fn timer(&mut self, at: SimTime, timer: Timer) {
        self.timers.push((at, timer));
    }

    pub fn note(&mut self, note: Note) {
        self.notes.push(note);
    }

    pub fn is_empty(&self) -> bool {
        self.broadcasts.is_empty() && self.timers.is_empty() && self.notes.is_empty()
    }

    pub fn count(&self, kind: ControlKind) -> usize {
        self.broadcasts.iter().filter(|(_, k)| *k == kind).count()
    }
}

pub trait RoutingProtocol {
    fn id(&self) -> NodeId;

    /// Schedules the protocol's initial timers at time zero.
    fn start(&mut self, fx: &mut Effects);

    fn on_timer(&mut self, now: SimTime, timer: Timer, fx: &mut Effects);

    fn on_control(&mut self, now: SimTime, from: NodeId, packet: &ControlPacket, fx: &mut Effects);

    /// Current forwarding table.
    fn routes(&mut self, now: SimTime) -> &RouteTable;

    /// Called whenever this node sends a data packet toward `destination`.
    fn note_data_sent(&mut self, _destination: NodeId, _now: SimTime) {}
}
