//! Optimized Link State Routing.
//!
//! HELLOs sense one-hop links and carry each node's neighbor list and MPR
//! choices. Nodes that have been chosen as MPR by someone (selector-bearing
//! nodes) originate TC messages advertising their selectors; a TC is relayed
//! only by a node that the previous hop selected as MPR. Routes are shortest
//! hop-count paths over one-hop links plus advertised TC links.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use crate::kernel::SimTime;
use crate::mpr::{self, TwoHop};
use crate::protocol::{ControlKind, Effects, Note, RoutingProtocol, Timer};
use crate::routing::{LinkMonitor, RouteEntry, RouteTable};
use crate::wire::ControlPacket;
use crate::NodeId;

#[derive(Debug, Clone, PartialEq)]
pub struct OlsrConfig {
    pub hello_interval: f64,
    pub tc_interval: f64,
    /// HELLO intervals of silence before a neighbor is dropped.
    pub hello_loss_threshold: u32,
    /// Minimum spacing between trigger TCs, seconds.
    pub trigger_min_gap: f64,
    /// Lifetime of a topology tuple, in TC intervals.
    pub topology_hold_intervals: f64,
}

impl OlsrConfig {
    pub fn original() -> Self {
        OlsrConfig {
            hello_interval: 2.0,
            tc_interval: 5.0,
            hello_loss_threshold: 3,
            trigger_min_gap: 0.5,
            topology_hold_intervals: 3.0,
        }
    }

    pub fn modified() -> Self {
        OlsrConfig {
            hello_interval: 1.0,
            tc_interval: 3.0,
            ..Self::original()
        }
    }

    fn topology_hold(&self) -> SimTime {
        SimTime::from_secs(self.tc_interval * self.topology_hold_intervals)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Hello {
    pub origin: NodeId,
    pub neighbors: Vec<NodeId>,
    pub mprs: Vec<NodeId>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TcMessage {
    pub origin: NodeId,
    pub sequence: u64,
    /// The origin's MPR selectors.
    pub advertised: Vec<NodeId>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct NeighborSet {
    pub one_hop: BTreeSet<NodeId>,
    pub two_hop: TwoHop,
    pub mpr_set: BTreeSet<NodeId>,
    pub mpr_selectors: BTreeSet<NodeId>,
}

#[derive(Debug, Clone)]
struct TopologyTuple {
    sequence: u64,
    advertised: BTreeSet<NodeId>,
    expires_at: SimTime,
}

#[derive(Debug, Clone, Copy)]
struct Duplicate {
    seen_at: SimTime,
    forwarded: bool,
}

/// Duplicate records are kept this long after first reception.
const DUPLICATE_HOLD: SimTime = SimTime::from_nanos(30_000_000_000);

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct OlsrStats {
    pub mpr_changes: u64,
    pub trigger_tcs: u64,
    pub periodic_tcs: u64,
    pub forwarded_tcs: u64,
}

pub struct Olsr {
    id: NodeId,
    config: OlsrConfig,
    links: LinkMonitor,
    /// Neighbor lists last advertised in each one-hop neighbor's HELLO.
    heard_lists: BTreeMap<NodeId, BTreeSet<NodeId>>,
    neighbors: NeighborSet,
    tc_sequence: u64,
    topology: BTreeMap<NodeId, TopologyTuple>,
    duplicates: BTreeMap<(NodeId, u64), Duplicate>,
    routes: RouteTable,
    routes_dirty: bool,
    routes_valid_until: SimTime,
    last_trigger: Option<SimTime>,
    trigger_pending: bool,
    trigger_timer_armed: bool,
    stats: OlsrStats,
}

impl Olsr {
    pub fn new(id: NodeId, config: OlsrConfig) -> Self {
        let links = LinkMonitor::new(id, config.hello_loss_threshold);
        Olsr {
            id,
            config,
            links,
            heard_lists: BTreeMap::new(),
            neighbors: NeighborSet::default(),
            tc_sequence: 0,
            topology: BTreeMap::new(),
            duplicates: BTreeMap::new(),
            routes: RouteTable::new(),
            routes_dirty: true,
            routes_valid_until: SimTime::MAX,
            last_trigger: None,
            trigger_pending: false,
            trigger_timer_armed: false,
            stats: OlsrStats::default(),
        }
    }

    pub fn config(&self) -> &OlsrConfig {
        &self.config
    }

    pub fn neighbor_set(&self) -> &NeighborSet {
        &self.neighbors
    }

    pub fn stats(&self) -> &OlsrStats {
        &self.stats
    }

    /// Whether this node has already relayed TC `(origin, sequence)`.
    pub fn has_forwarded(&self, origin: NodeId, sequence: u64) -> bool {
        self.duplicates.get(&(origin, sequence)).is_some_and(|d| d.forwarded)
    }

    /// Topology links `origin → selector` currently held.
    pub fn topology_links(&self, now: SimTime) -> Vec<(NodeId, NodeId)> {
        self.topology
            .iter()
            .filter(|(_, t)| t.expires_at > now)
            .flat_map(|(&o, t)| t.advertised.iter().map(move |&s| (o, s)))
            .collect()
    }

    pub fn hello(&self) -> Hello {
        Hello {
            origin: self.id,
            neighbors: self.neighbors.one_hop.iter().copied().collect(),
            mprs: self.neighbors.mpr_set.iter().copied().collect(),
        }
    }

    fn hello_tick(&mut self, now: SimTime, fx: &mut Effects) {
        fx.broadcast(ControlPacket::Hello(self.hello()), ControlKind::Hello);
        fx.timer(now + SimTime::from_secs(self.config.hello_interval), Timer::OlsrHello);
        self.duplicates
            .retain(|_, d| now.saturating_sub(d.seen_at) < DUPLICATE_HOLD);
    }

    fn tc_tick(&mut self, now: SimTime, fx: &mut Effects) {
        fx.note(Note::SelectorCensus {
            selectors: self.neighbors.mpr_selectors.len(),
        });
        if !self.neighbors.mpr_selectors.is_empty() {
            self.originate_tc(now, ControlKind::TcPeriodic, fx);
            self.stats.periodic_tcs += 1;
        }
        fx.timer(now + SimTime::from_secs(self.config.tc_interval), Timer::OlsrTc);
    }

    fn originate_tc(&mut self, now: SimTime, kind: ControlKind, fx: &mut Effects) {
        self.tc_sequence += 1;
        self.duplicates.insert(
            (self.id, self.tc_sequence),
            Duplicate {
                seen_at: now,
                forwarded: true,
            },
        );
        let tc = TcMessage {
            origin: self.id,
            sequence: self.tc_sequence,
            advertised: self.neighbors.mpr_selectors.iter().copied().collect(),
        };
        fx.broadcast(ControlPacket::Tc(tc), kind);
    }

    /// Reacts to a change of the MPR set or the selector set with an
    /// immediate TC, no more often than `trigger_min_gap`.
    pub fn on_mpr_change(&mut self, now: SimTime, fx: &mut Effects) {
        self.stats.mpr_changes += 1;
        fx.note(Note::MprChange);
        if self.neighbors.mpr_selectors.is_empty() {
            return;
        }
        let gap = SimTime::from_secs(self.config.trigger_min_gap);
        match self.last_trigger {
            Some(last) if now.saturating_sub(last) < gap => {
                self.trigger_pending = true;
                if !self.trigger_timer_armed {
                    self.trigger_timer_armed = true;
                    fx.timer(last + gap, Timer::OlsrTriggerTc);
                }
            }
            _ => self.fire_trigger(now, fx),
        }
    }

    fn fire_trigger(&mut self, now: SimTime, fx: &mut Effects) {
        self.trigger_pending = false;
        self.last_trigger = Some(now);
        self.stats.trigger_tcs += 1;
        self.originate_tc(now, ControlKind::TcTrigger, fx);
    }

    fn deferred_trigger(&mut self, now: SimTime, fx: &mut Effects) {
        self.trigger_timer_armed = false;
        if self.trigger_pending && !self.neighbors.mpr_selectors.is_empty() {
            self.fire_trigger(now, fx);
        } else {
            self.trigger_pending = false;
        }
    }

    /// Rebuilds the two-hop set and MPR set; returns whether the MPR set changed.
    fn refresh_neighborhood(&mut self) -> bool {
        let mut two_hop = TwoHop::new();
        for &n in &self.neighbors.one_hop {
            let Some(list) = self.heard_lists.get(&n) else {
                continue;
            };
            for &far in list {
                if far != self.id && !self.neighbors.one_hop.contains(&far) {
                    two_hop.entry(far).or_default().insert(n);
                }
            }
        }
        let mprs = mpr::select_mprs(&self.neighbors.one_hop, &two_hop)
            .expect("two-hop set is built from one-hop neighbors");
        debug_assert!(mpr::covers(&mprs, &two_hop));
        self.neighbors.two_hop = two_hop;
        self.routes_dirty = true;
        if mprs != self.neighbors.mpr_set {
            self.neighbors.mpr_set = mprs;
            true
        } else {
            false
        }
    }

    pub fn process_hello(&mut self, now: SimTime, from: NodeId, hello: &Hello, fx: &mut Effects) {
        if from == self.id || self.links.note_control_heard(from, now).is_err() {
            return;
        }
        let new_neighbor = self.neighbors.one_hop.insert(from);
        let list: BTreeSet<NodeId> = hello.neighbors.iter().copied().collect();
        let list_changed = self.heard_lists.get(&from) != Some(&list);
        if list_changed {
            self.heard_lists.insert(from, list);
        }
        let selected = hello.mprs.contains(&self.id);
        let selectors_changed = if selected {
            self.neighbors.mpr_selectors.insert(from)
        } else {
            self.neighbors.mpr_selectors.remove(&from)
        };
        let mprs_changed = (new_neighbor || list_changed) && self.refresh_neighborhood();
        if selectors_changed || mprs_changed {
            self.on_mpr_change(now, fx);
        }
    }

    fn link_tick(&mut self, now: SimTime, fx: &mut Effects) {
        let broken = self.links.link_interval_tick();
        fx.timer(now + SimTime::from_secs(self.config.hello_interval), Timer::LinkTick);
        if !broken.is_empty() {
            self.drop_neighbors(now, &broken, fx);
        }
    }

    fn drop_neighbors(&mut self, now: SimTime, broken: &[NodeId], fx: &mut Effects) {
        let mut selectors_changed = false;
        for n in broken {
            self.neighbors.one_hop.remove(n);
            self.heard_lists.remove(n);
            selectors_changed |= self.neighbors.mpr_selectors.remove(n);
        }
        let mprs_changed = self.refresh_neighborhood();
        if selectors_changed || mprs_changed {
            self.on_mpr_change(now, fx);
        }
    }

    /// Injects a link failure as if the loss threshold had been reached.
    pub fn break_link(&mut self, now: SimTime, neighbor: NodeId, fx: &mut Effects) {
        if self.links.force_break(neighbor) {
            self.drop_neighbors(now, &[neighbor], fx);
        }
    }

    pub fn process_tc(&mut self, now: SimTime, from: NodeId, tc: &TcMessage, fx: &mut Effects) {
        if tc.origin == self.id {
            return;
        }
        let key = (tc.origin, tc.sequence);
        let dup = match self.duplicates.get(&key) {
            Some(d) => *d,
            None => {
                let fresh = self.topology.get(&tc.origin).is_none_or(|t| tc.sequence > t.sequence);
                if fresh {
                    self.topology.insert(
                        tc.origin,
                        TopologyTuple {
                            sequence: tc.sequence,
                            advertised: tc.advertised.iter().copied().collect(),
                            expires_at: now + self.config.topology_hold(),
                        },
                    );
                    self.routes_dirty = true;
                }
                let d = Duplicate {
                    seen_at: now,
                    forwarded: false,
                };
                self.duplicates.insert(key, d);
                d
            }
        };
        if !dup.forwarded && self.neighbors.mpr_selectors.contains(&from) {
            self.duplicates.insert(key, Duplicate { forwarded: true, ..dup });
            self.stats.forwarded_tcs += 1;
            fx.broadcast(ControlPacket::Tc(tc.clone()), ControlKind::TcForward);
        }
    }

    /// Shortest hop-count routes over one-hop links and live TC links;
    /// equal-length paths resolve to the smallest next hop.
    pub fn compute_routes(&mut self, now: SimTime) {
        let mut adjacency: BTreeMap<NodeId, Vec<NodeId>> = BTreeMap::new();
        adjacency.insert(self.id, self.neighbors.one_hop.iter().copied().collect());
        let mut valid_until = SimTime::MAX;
        for (&origin, tuple) in &self.topology {
            if tuple.expires_at <= now {
                continue;
            }
            valid_until = valid_until.min(tuple.expires_at);
            adjacency
                .entry(origin)
                .or_default()
                .extend(tuple.advertised.iter().copied());
        }

        let mut dist: BTreeMap<NodeId, (u32, NodeId)> = BTreeMap::new();
        let mut queue = VecDeque::new();
        for &n in &self.neighbors.one_hop {
            dist.insert(n, (1, n));
            queue.push_back(n);
        }
        // BFS visits nodes in nondecreasing distance, so when `u` is popped
        // its next hop is final and can be offered to every successor.
        while let Some(u) = queue.pop_front() {
            let (du, hop) = dist[&u];
            let Some(succ) = adjacency.get(&u) else {
                continue;
            };
            for &v in succ {
                if v == self.id {
                    continue;
                }
                match dist.get_mut(&v) {
                    None => {
                        dist.insert(v, (du + 1, hop));
                        queue.push_back(v);
                    }
                    Some((dv, hv)) if *dv == du + 1 && hop < *hv => *hv = hop,
                    _ => {}
                }
            }
        }

        self.routes.clear();
        for (dest, (metric, next_hop)) in dist {
            self.routes.insert(RouteEntry {
                destination: dest,
                next_hop,
                metric,
                sequence: 0,
                installed_at: now,
            });
        }
        self.routes_dirty = false;
        self.routes_valid_until = valid_until;
    }
}

impl RoutingProtocol for Olsr {
    fn id(&self) -> NodeId {
        self.id
    }

    fn start(&mut self, fx: &mut Effects) {
        let hello = SimTime::from_secs(self.config.hello_interval);
        fx.timer(hello, Timer::OlsrHello);
        fx.timer(hello, Timer::LinkTick);
        fx.timer(SimTime::from_secs(self.config.tc_interval), Timer::OlsrTc);
    }

    fn on_timer(&mut self, now: SimTime, timer: Timer, fx: &mut Effects) {
        match timer {
            Timer::OlsrHello => self.hello_tick(now, fx),
            Timer::OlsrTc => self.tc_tick(now, fx),
            Timer::OlsrTriggerTc => self.deferred_trigger(now, fx),
            Timer::LinkTick => self.link_tick(now, fx),
            _ => {}
        }
    }

    fn on_control(&mut self, now: SimTime, from: NodeId, packet: &ControlPacket, fx: &mut Effects) {
        match packet {
            ControlPacket::Hello(h) => self.process_hello(now, from, h, fx),
            ControlPacket::Tc(tc) => self.process_tc(now, from, tc, fx),
            _ => {}
        }
    }

    fn routes(&mut self, now: SimTime) -> &RouteTable {
        if self.routes_dirty || now >= self.routes_valid_until {
            self.compute_routes(now);
        }
        &self.routes
    }
}
