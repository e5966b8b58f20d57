//! Fisheye State Routing.
//!
//! Each node keeps the whole link-state topology and exchanges it with its
//! one-hop neighbors only. Entries for destinations within `scope_radius`
//! hops go out every `inner_interval`; everything farther goes out every
//! `outer_interval`. There are no trigger updates: the inner updates double
//! as the node's beacon for link sensing.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use crate::kernel::SimTime;
use crate::protocol::{ControlKind, Effects, RoutingProtocol, Timer};
use crate::routing::{LinkMonitor, RouteEntry, RouteTable, DEFAULT_LOSS_THRESHOLD};
use crate::wire::ControlPacket;
use crate::NodeId;

#[derive(Debug, Clone, PartialEq)]
pub struct FsrConfig {
    pub inner_interval: f64,
    pub outer_interval: f64,
    pub scope_radius: u32,
    pub loss_threshold: u32,
    /// Stored link states not refreshed for this many outer intervals are dropped.
    pub entry_lifetime_intervals: f64,
}

impl FsrConfig {
    pub fn original() -> Self {
        FsrConfig {
            inner_interval: 5.0,
            outer_interval: 20.0,
            scope_radius: 2,
            loss_threshold: DEFAULT_LOSS_THRESHOLD,
            entry_lifetime_intervals: 3.0,
        }
    }

    pub fn modified() -> Self {
        FsrConfig {
            inner_interval: 1.0,
            outer_interval: 5.0,
            ..Self::original()
        }
    }

    fn entry_lifetime(&self) -> SimTime {
        SimTime::from_secs(self.outer_interval * self.entry_lifetime_intervals)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scope {
    Inner,
    Outer,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinkStateEntry {
    pub destination: NodeId,
    pub neighbors: Vec<NodeId>,
    pub sequence: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FsrUpdate {
    pub origin: NodeId,
    pub scope: Scope,
    pub carried: Vec<LinkStateEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TopologyRecord {
    pub neighbors: Vec<NodeId>,
    pub sequence: u64,
    pub last_refresh: SimTime,
    /// Hops from the owning node; `None` when currently unreachable.
    pub hop_distance: Option<u32>,
}

pub struct Fsr {
    id: NodeId,
    config: FsrConfig,
    links: LinkMonitor,
    own_sequence: u64,
    topology: BTreeMap<NodeId, TopologyRecord>,
    routes: RouteTable,
    dirty: bool,
}

impl Fsr {
    pub fn new(id: NodeId, config: FsrConfig) -> Self {
        let links = LinkMonitor::new(id, config.loss_threshold);
        let mut fsr = Fsr {
            id,
            config,
            links,
            own_sequence: 0,
            topology: BTreeMap::new(),
            routes: RouteTable::new(),
            dirty: true,
        };
        fsr.refresh_own(SimTime::ZERO);
        fsr
    }

    pub fn config(&self) -> &FsrConfig {
        &self.config
    }

    pub fn own_sequence(&self) -> u64 {
        self.own_sequence
    }

    /// Topology table including the node's own record.
    pub fn topology(&mut self, now: SimTime) -> &BTreeMap<NodeId, TopologyRecord> {
        self.recompute_if_dirty(now);
        &self.topology
    }

    fn refresh_own(&mut self, now: SimTime) {
        let neighbors: Vec<NodeId> = self.links.up_neighbors().collect();
        self.topology.insert(
            self.id,
            TopologyRecord {
                neighbors,
                sequence: self.own_sequence,
                last_refresh: now,
                hop_distance: Some(0),
            },
        );
        self.dirty = true;
    }

    fn expire(&mut self, now: SimTime) {
        let lifetime = self.config.entry_lifetime();
        let me = self.id;
        let before = self.topology.len();
        self.topology
            .retain(|&d, r| d == me || now.saturating_sub(r.last_refresh) < lifetime);
        if self.topology.len() != before {
            self.dirty = true;
        }
    }

    fn recompute_if_dirty(&mut self, now: SimTime) {
        if self.dirty {
            self.recompute(now);
        }
    }

    /// Hop distances and first hops by breadth-first relaxation over the
    /// stored topology; equal-length paths resolve to the smallest first hop.
    fn recompute(&mut self, now: SimTime) {
        let mut best: BTreeMap<NodeId, (u32, NodeId)> = BTreeMap::new();
        let mut queue = VecDeque::new();
        for &nb in &self.topology[&self.id].neighbors {
            best.insert(nb, (1, nb));
            queue.push_back(nb);
        }
        while let Some(u) = queue.pop_front() {
            let (du, hop) = best[&u];
            let Some(rec) = self.topology.get(&u) else {
                continue;
            };
            for &v in &rec.neighbors {
                if v == self.id {
                    continue;
                }
                match best.get_mut(&v) {
                    None => {
                        best.insert(v, (du + 1, hop));
                        queue.push_back(v);
                    }
                    Some((dv, hv)) if *dv == du + 1 && hop < *hv => *hv = hop,
                    _ => {}
                }
            }
        }
        for (&d, rec) in self.topology.iter_mut() {
            if d != self.id {
                rec.hop_distance = best.get(&d).map(|&(h, _)| h);
            }
        }
        self.routes.clear();
        for (dest, (metric, next_hop)) in best {
            self.routes.insert(RouteEntry {
                destination: dest,
                next_hop,
                metric,
                sequence: 0,
                installed_at: now,
            });
        }
        self.dirty = false;
    }

    /// Known destinations split by fisheye scope: within `scope_radius` hops,
    /// and everything else (farther or currently unreachable).
    pub fn scope_partition(&mut self, now: SimTime) -> (BTreeSet<NodeId>, BTreeSet<NodeId>) {
        self.recompute_if_dirty(now);
        let mut inner = BTreeSet::new();
        let mut outer = BTreeSet::new();
        for (&d, rec) in &self.topology {
            if d == self.id {
                continue;
            }
            match rec.hop_distance {
                Some(h) if h <= self.config.scope_radius => inner.insert(d),
                _ => outer.insert(d),
            };
        }
        (inner, outer)
    }

    fn carried(&self, dests: impl IntoIterator<Item = NodeId>) -> Vec<LinkStateEntry> {
        dests
            .into_iter()
            .map(|d| {
                let rec = &self.topology[&d];
                LinkStateEntry {
                    destination: d,
                    neighbors: rec.neighbors.clone(),
                    sequence: rec.sequence,
                }
            })
            .collect()
    }

    fn inner_tick(&mut self, now: SimTime, fx: &mut Effects) {
        self.own_sequence += 1;
        self.refresh_own(now);
        self.expire(now);
        let (inner, _) = self.scope_partition(now);
        let carried = self.carried(std::iter::once(self.id).chain(inner));
        fx.broadcast(
            ControlPacket::Fsr(FsrUpdate {
                origin: self.id,
                scope: Scope::Inner,
                carried,
            }),
            ControlKind::FsrInner,
        );
        fx.timer(now + SimTime::from_secs(self.config.inner_interval), Timer::FsrInner);
    }

    fn outer_tick(&mut self, now: SimTime, fx: &mut Effects) {
        self.expire(now);
        let (_, outer) = self.scope_partition(now);
        let carried = self.carried(outer);
        fx.broadcast(
            ControlPacket::Fsr(FsrUpdate {
                origin: self.id,
                scope: Scope::Outer,
                carried,
            }),
            ControlKind::FsrOuter,
        );
        fx.timer(now + SimTime::from_secs(self.config.outer_interval), Timer::FsrOuter);
    }

    pub fn process_update(&mut self, now: SimTime, from: NodeId, update: &FsrUpdate) {
        match self.links.note_control_heard(from, now) {
            Err(_) => return,
            Ok(Some(_)) => self.refresh_own(now),
            Ok(None) => {}
        }
        for e in &update.carried {
            if e.destination == self.id {
                continue;
            }
            let newer = self
                .topology
                .get(&e.destination)
                .is_none_or(|r| e.sequence > r.sequence);
            if newer {
                self.topology.insert(
                    e.destination,
                    TopologyRecord {
                        neighbors: e.neighbors.clone(),
                        sequence: e.sequence,
                        last_refresh: now,
                        hop_distance: None,
                    },
                );
                self.dirty = true;
            }
        }
    }

    fn link_tick(&mut self, now: SimTime, fx: &mut Effects) {
        if !self.links.link_interval_tick().is_empty() {
            self.refresh_own(now);
        }
        fx.timer(now + SimTime::from_secs(self.config.inner_interval), Timer::LinkTick);
    }

    /// Injects a link failure as if the loss threshold had been reached.
    pub fn break_link(&mut self, now: SimTime, neighbor: NodeId) {
        if self.links.force_break(neighbor) {
            self.refresh_own(now);
        }
    }
}

impl RoutingProtocol for Fsr {
    fn id(&self) -> NodeId {
        self.id
    }

    fn start(&mut self, fx: &mut Effects) {
        let inner = SimTime::from_secs(self.config.inner_interval);
        fx.timer(inner, Timer::FsrInner);
        fx.timer(inner, Timer::LinkTick);
        fx.timer(SimTime::from_secs(self.config.outer_interval), Timer::FsrOuter);
    }

    fn on_timer(&mut self, now: SimTime, timer: Timer, fx: &mut Effects) {
        match timer {
            Timer::FsrInner => self.inner_tick(now, fx),
            Timer::FsrOuter => self.outer_tick(now, fx),
            Timer::LinkTick => self.link_tick(now, fx),
            _ => {}
        }
    }

    fn on_control(&mut self, now: SimTime, from: NodeId, packet: &ControlPacket, _fx: &mut Effects) {
        if let ControlPacket::Fsr(u) = packet {
            self.process_update(now, from, u);
        }
    }

    fn routes(&mut self, now: SimTime) -> &RouteTable {
        self.recompute_if_dirty(now);
        &self.routes
    }
}
