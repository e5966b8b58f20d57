//! Machinery shared by all three protocols: interval-based link sensing,
//! route tables and hop-by-hop data forwarding.

use std::collections::BTreeMap;

use crate::kernel::SimTime;
use crate::NodeId;

/// Hop-count metric of an unreachable destination.
pub const INFINITE_METRIC: u32 = u32::MAX;

pub const DEFAULT_TTL: u32 = 32;
pub const DEFAULT_LOSS_THRESHOLD: u32 = 3;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinkStatus {
    pub neighbor: NodeId,
    pub last_heard: SimTime,
    /// Consecutive link-state intervals without hearing the neighbor.
    pub misses: u32,
    pub up: bool,
    heard_this_interval: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinkEvent {
    Up(NodeId),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum LinkError {
    #[error("node {0} heard its own control message")]
    SelfMessage(NodeId),
}

/// Per-node neighbor sensing: a link is up from first contact until the
/// neighbor stays silent for `loss_threshold` consecutive intervals.
#[derive(Debug, Clone)]
pub struct LinkMonitor {
    owner: NodeId,
    loss_threshold: u32,
    links: BTreeMap<NodeId, LinkStatus>,
}

impl LinkMonitor {
    pub fn new(owner: NodeId, loss_threshold: u32) -> Self {
        LinkMonitor {
            owner,
            loss_threshold: loss_threshold.max(1),
            links: BTreeMap::new(),
        }
    }

    pub fn note_control_heard(
        &mut self,
        neighbor: NodeId,
        t: SimTime,
    ) -> Result<Option<LinkEvent>, LinkError> {
        if neighbor == self.owner {
            return Err(LinkError::SelfMessage(neighbor));
        }
        let link = self.links.entry(neighbor).or_insert(LinkStatus {
            neighbor,
            last_heard: t,
            misses: 0,
            up: false,
            heard_this_interval: false,
        });
        link.last_heard = t;
        link.misses = 0;
        link.heard_this_interval = true;
        if link.up {
            Ok(None)
        } else {
            link.up = true;
            Ok(Some(LinkEvent::Up(neighbor)))
        }
    }

    /// Closes one link-state interval. Returns the links that just crossed
    /// the loss threshold; each break is reported once.
    pub fn link_interval_tick(&mut self) -> Vec<NodeId> {
        let mut broken = Vec::new();
        for link in self.links.values_mut().filter(|l| l.up) {
            if std::mem::take(&mut link.heard_this_interval) {
                link.misses = 0;
                continue;
            }
            link.misses += 1;
            if link.misses >= self.loss_threshold {
                link.up = false;
                broken.push(link.neighbor);
            }
        }
        broken
    }

    pub fn is_up(&self, neighbor: NodeId) -> bool {
        self.links.get(&neighbor).is_some_and(|l| l.up)
    }

    pub fn status(&self, neighbor: NodeId) -> Option<&LinkStatus> {
        self.links.get(&neighbor)
    }

    pub fn up_neighbors(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.links.values().filter(|l| l.up).map(|l| l.neighbor)
    }

    /// Declares a link broken immediately; returns false if it was not up.
    pub fn force_break(&mut self, neighbor: NodeId) -> bool {
        match self.links.get_mut(&neighbor) {
            Some(link) if link.up => {
                link.up = false;
                link.heard_this_interval = false;
                true
            }
            _ => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RouteEntry {
    pub destination: NodeId,
    pub next_hop: NodeId,
    /// Hop count; [`INFINITE_METRIC`] marks an invalid entry.
    pub metric: u32,
    /// Destination sequence number (DSDV only, 0 elsewhere).
    pub sequence: u64,
    pub installed_at: SimTime,
}

impl RouteEntry {
    pub fn is_valid(&self) -> bool {
        self.metric != INFINITE_METRIC
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RouteTable {
    entries: BTreeMap<NodeId, RouteEntry>,
}

impl RouteTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, entry: RouteEntry) {
        self.entries.insert(entry.destination, entry);
    }

    pub fn remove(&mut self, destination: NodeId) -> Option<RouteEntry> {
        self.entries.remove(&destination)
    }

    /// Entry for `destination`, valid or not.
    pub fn entry(&self, destination: NodeId) -> Option<&RouteEntry> {
        self.entries.get(&destination)
    }

    pub fn entry_mut(&mut self, destination: NodeId) -> Option<&mut RouteEntry> {
        self.entries.get_mut(&destination)
    }

    /// Valid entry for `destination`.
    pub fn lookup(&self, destination: NodeId) -> Option<&RouteEntry> {
        self.entries.get(&destination).filter(|e| e.is_valid())
    }

    pub fn iter(&self) -> impl Iterator<Item = &RouteEntry> {
        self.entries.values()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn clear(&mut self) {
        self.entries.clear();
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DataPacket {
    pub id: u64,
    pub source: NodeId,
    pub destination: NodeId,
    pub size: usize,
    pub created_at: SimTime,
    pub hops_traversed: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum DropCause {
    NoRoute,
    Ttl,
    Queue,
    /// Next hop out of range or frame lost on the air.
    Link,
}

impl DropCause {
    pub const ALL: [DropCause; 4] = [
        DropCause::NoRoute,
        DropCause::Ttl,
        DropCause::Queue,
        DropCause::Link,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DropCause::NoRoute => "noroute",
            DropCause::Ttl => "ttl",
            DropCause::Queue => "queue",
            DropCause::Link => "link",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        DropCause::ALL.into_iter().find(|c| c.as_str() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ForwardAction {
    /// The packet is addressed to this node.
    Deliver,
    Transmit { next_hop: NodeId },
    Drop(DropCause),
}

/// One hop-by-hop forwarding decision. On `Transmit` the packet's hop
/// counter has already been incremented.
pub fn forward_data(node: NodeId, pkt: &mut DataPacket, table: &RouteTable, ttl: u32) -> ForwardAction {
    if pkt.destination == node {
        return ForwardAction::Deliver;
    }
    if pkt.hops_traversed >= ttl {
        return ForwardAction::Drop(DropCause::Ttl);
    }
    match table.lookup(pkt.destination) {
        Some(route) => {
            pkt.hops_traversed += 1;
            ForwardAction::Transmit {
                next_hop: route.next_hop,
            }
        }
        None => ForwardAction::Drop(DropCause::NoRoute),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const A: NodeId = NodeId(0);
    const B: NodeId = NodeId(1);
    const C: NodeId = NodeId(2);

    fn t(s: f64) -> SimTime {
        SimTime::from_secs(s)
    }

    #[test]
    fn first_contact_raises_link_up() {
        let mut m = LinkMonitor::new(A, 3);
        assert_eq!(m.note_control_heard(B, t(1.0)), Ok(Some(LinkEvent::Up(B))));
        assert_eq!(m.note_control_heard(B, t(2.0)), Ok(None));
        assert_eq!(m.status(B).unwrap().misses, 0);
    }

    #[test]
    fn self_message_rejected() {
        let mut m = LinkMonitor::new(A, 3);
        assert_eq!(m.note_control_heard(A, t(1.0)), Err(LinkError::SelfMessage(A)));
    }

    #[test]
    fn silent_neighbor_breaks_after_threshold_once() {
        let mut m = LinkMonitor::new(A, 3);
        m.note_control_heard(B, t(0.5)).unwrap();
        assert!(m.link_interval_tick().is_empty()); // heard during this interval
        assert!(m.link_interval_tick().is_empty()); // miss 1
        assert!(m.link_interval_tick().is_empty()); // miss 2
        assert_eq!(m.link_interval_tick(), vec![B]); // miss 3
        assert!(!m.is_up(B));
        assert!(m.link_interval_tick().is_empty());
        assert!(m.link_interval_tick().is_empty());
    }

    #[test]
    fn hearing_mid_interval_keeps_misses_at_zero() {
        let mut m = LinkMonitor::new(A, 3);
        m.note_control_heard(B, t(0.5)).unwrap();
        for i in 0..10 {
            m.note_control_heard(B, t(1.0 + i as f64)).unwrap();
            assert!(m.link_interval_tick().is_empty());
            assert_eq!(m.status(B).unwrap().misses, 0);
        }
    }

    #[test]
    fn broken_link_comes_back_on_contact() {
        let mut m = LinkMonitor::new(A, 1);
        m.note_control_heard(B, t(0.0)).unwrap();
        m.link_interval_tick();
        assert_eq!(m.link_interval_tick(), vec![B]);
        assert_eq!(m.note_control_heard(B, t(5.0)), Ok(Some(LinkEvent::Up(B))));
    }

    fn table_with_route(dest: NodeId, next: NodeId) -> RouteTable {
        let mut table = RouteTable::new();
        table.insert(RouteEntry {
            destination: dest,
            next_hop: next,
            metric: 2,
            sequence: 0,
            installed_at: SimTime::ZERO,
        });
        table
    }

    fn packet(dest: NodeId, hops: u32) -> DataPacket {
        DataPacket {
            id: 1,
            source: A,
            destination: dest,
            size: 64,
            created_at: SimTime::ZERO,
            hops_traversed: hops,
        }
    }

    #[test]
    fn forwarding_uses_valid_route() {
        let table = table_with_route(C, B);
        let mut pkt = packet(C, 0);
        assert_eq!(forward_data(A, &mut pkt, &table, 32), ForwardAction::Transmit { next_hop: B });
        assert_eq!(pkt.hops_traversed, 1);
    }

    #[test]
    fn missing_route_is_a_noroute_drop() {
        let mut pkt = packet(C, 0);
        assert_eq!(
            forward_data(A, &mut pkt, &RouteTable::new(), 32),
            ForwardAction::Drop(DropCause::NoRoute)
        );
    }

    #[test]
    fn exhausted_ttl_is_dropped() {
        let table = table_with_route(C, B);
        let mut pkt = packet(C, 32);
        assert_eq!(forward_data(A, &mut pkt, &table, 32), ForwardAction::Drop(DropCause::Ttl));
    }

    #[test]
    fn invalid_entries_are_never_used() {
        let mut table = table_with_route(C, B);
        table.entry_mut(C).unwrap().metric = INFINITE_METRIC;
        let mut pkt = packet(C, 0);
        assert_eq!(
            forward_data(A, &mut pkt, &table, 32),
            ForwardAction::Drop(DropCause::NoRoute)
        );
    }
}
