//! Destination-Sequenced Distance Vector.
//!
//! Every node floods its table to its neighbors every `periodic_interval`,
//! stamping its own entry with a fresh even sequence number. A broken route
//! carries an odd sequence and an infinite metric. Received routes are used
//! for forwarding at once; an improved metric is only advertised after it
//! has been confirmed `settling_count` times. Trigger updates are raised only
//! when a break touches a route that carried data recently, and are spaced
//! at least `trigger_update_time` apart.

use std::collections::{BTreeMap, BTreeSet};

use crate::kernel::SimTime;
use crate::protocol::{ControlKind, Effects, Note, RoutingProtocol, Timer};
use crate::routing::{LinkMonitor, RouteEntry, RouteTable, DEFAULT_LOSS_THRESHOLD, INFINITE_METRIC};
use crate::wire::ControlPacket;
use crate::NodeId;

/// Wire metric of an unreachable destination.
pub const WIRE_INFINITY: i32 = i32::MAX;

#[derive(Debug, Clone, PartialEq)]
pub struct DsdvConfig {
    pub periodic_interval: f64,
    /// Minimum spacing between trigger updates, seconds.
    pub trigger_update_time: f64,
    /// Confirmations an improved metric needs before it is advertised.
    pub settling_count: u32,
    /// Entries an incremental update may carry before a full dump is sent.
    pub npdu_capacity: usize,
    pub loss_threshold: u32,
}

impl DsdvConfig {
    pub fn original() -> Self {
        DsdvConfig {
            periodic_interval: 15.0,
            trigger_update_time: 15.0,
            settling_count: 6,
            npdu_capacity: 100,
            loss_threshold: DEFAULT_LOSS_THRESHOLD,
        }
    }

    pub fn modified() -> Self {
        DsdvConfig {
            trigger_update_time: 30.0,
            settling_count: 7,
            ..Self::original()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DsdvEntry {
    pub destination: NodeId,
    /// Hop count, or [`WIRE_INFINITY`]. Negative values are malformed.
    pub metric: i32,
    pub sequence: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DsdvUpdate {
    pub origin: NodeId,
    pub full_dump: bool,
    pub entries: Vec<DsdvEntry>,
}

/// An improved route waiting to be advertised.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SettlingRecord {
    pub destination: NodeId,
    pub best_candidate: RouteEntry,
    pub first_seen: SimTime,
    pub samples: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Advert {
    metric: u32,
    sequence: u64,
}

impl Advert {
    fn wire(self, destination: NodeId) -> DsdvEntry {
        DsdvEntry {
            destination,
            metric: if self.metric == INFINITE_METRIC {
                WIRE_INFINITY
            } else {
                self.metric.min(WIRE_INFINITY as u32 - 1) as i32
            },
            sequence: self.sequence,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DsdvStats {
    pub periodic_updates: u64,
    pub trigger_updates: u64,
    pub full_dumps: u64,
    pub suppressed_triggers: u64,
    pub malformed: u64,
}

pub struct Dsdv {
    id: NodeId,
    config: DsdvConfig,
    links: LinkMonitor,
    own_sequence: u64,
    table: RouteTable,
    advertised: BTreeMap<NodeId, Advert>,
    settling: BTreeMap<NodeId, SettlingRecord>,
    changed: BTreeSet<NodeId>,
    /// Last time data was sent toward each destination through this node.
    active: BTreeMap<NodeId, SimTime>,
    last_trigger: Option<SimTime>,
    trigger_pending: bool,
    trigger_timer_armed: bool,
    stats: DsdvStats,
}

impl Dsdv {
    pub fn new(id: NodeId, config: DsdvConfig) -> Self {
        let links = LinkMonitor::new(id, config.loss_threshold);
        Dsdv {
            id,
            config,
            links,
            own_sequence: 0,
            table: RouteTable::new(),
            advertised: BTreeMap::new(),
            settling: BTreeMap::new(),
            changed: BTreeSet::new(),
            active: BTreeMap::new(),
            last_trigger: None,
            trigger_pending: false,
            trigger_timer_armed: false,
            stats: DsdvStats::default(),
        }
    }

    pub fn config(&self) -> &DsdvConfig {
        &self.config
    }

    pub fn table(&self) -> &RouteTable {
        &self.table
    }

    pub fn own_sequence(&self) -> u64 {
        self.own_sequence
    }

    pub fn stats(&self) -> &DsdvStats {
        &self.stats
    }

    pub fn settling(&self, destination: NodeId) -> Option<&SettlingRecord> {
        self.settling.get(&destination)
    }

    /// The (metric, sequence) this node currently advertises for `destination`.
    pub fn advertised(&self, destination: NodeId) -> Option<(u32, u64)> {
        self.advertised
            .get(&destination)
            .map(|a| (a.metric, a.sequence))
    }

    fn is_active(&self, destination: NodeId, now: SimTime) -> bool {
        let window = SimTime::from_secs(self.config.periodic_interval);
        self.active
            .get(&destination)
            .is_some_and(|&at| now.saturating_sub(at) < window)
    }

    fn set_advert(&mut self, destination: NodeId, advert: Advert) {
        if self.advertised.insert(destination, advert) != Some(advert) {
            self.changed.insert(destination);
        }
    }

    /// Builds and emits one update, bumping the own sequence number.
    pub fn emit_update(&mut self, kind: ControlKind, fx: &mut Effects) {
        self.own_sequence += 2;
        let own = DsdvEntry {
            destination: self.id,
            metric: 0,
            sequence: self.own_sequence,
        };
        let full_dump = self.changed.len() > self.config.npdu_capacity;
        let picked: Vec<NodeId> = if full_dump {
            self.advertised.keys().copied().collect()
        } else {
            self.changed.iter().copied().collect()
        };
        let mut entries = Vec::with_capacity(picked.len() + 1);
        entries.push(own);
        entries.extend(picked.into_iter().map(|d| self.advertised[&d].wire(d)));
        self.changed.clear();
        if full_dump {
            self.stats.full_dumps += 1;
        }
        fx.broadcast(
            ControlPacket::Dsdv(DsdvUpdate {
                origin: self.id,
                full_dump,
                entries,
            }),
            kind,
        );
    }

    fn periodic(&mut self, now: SimTime, fx: &mut Effects) {
        self.stats.periodic_updates += 1;
        self.emit_update(ControlKind::DsdvPeriodic, fx);
        fx.timer(now + SimTime::from_secs(self.config.periodic_interval), Timer::DsdvPeriodic);
    }

    fn request_trigger(&mut self, now: SimTime, fx: &mut Effects) {
        let gap = SimTime::from_secs(self.config.trigger_update_time);
        match self.last_trigger {
            Some(last) if now.saturating_sub(last) < gap => {
                self.stats.suppressed_triggers += 1;
                self.trigger_pending = true;
                if !self.trigger_timer_armed {
                    self.trigger_timer_armed = true;
                    fx.timer(last + gap, Timer::DsdvTrigger);
                }
            }
            _ => self.fire_trigger(now, fx),
        }
    }

    fn fire_trigger(&mut self, now: SimTime, fx: &mut Effects) {
        self.trigger_pending = false;
        self.last_trigger = Some(now);
        self.stats.trigger_updates += 1;
        self.emit_update(ControlKind::DsdvTrigger, fx);
    }

    fn deferred_trigger(&mut self, now: SimTime, fx: &mut Effects) {
        self.trigger_timer_armed = false;
        // A periodic update in the meantime may already have carried the news.
        if std::mem::take(&mut self.trigger_pending) && !self.changed.is_empty() {
            self.fire_trigger(now, fx);
        }
    }

    /// Marks every route through `neighbor` broken. Returns whether any of
    /// them carried data recently.
    fn invalidate_via(&mut self, now: SimTime, neighbor: NodeId) -> bool {
        let affected: Vec<NodeId> = self
            .table
            .iter()
            .filter(|r| r.next_hop == neighbor && r.is_valid())
            .map(|r| r.destination)
            .collect();
        let mut any_active = false;
        for dest in affected {
            let entry = self.table.entry_mut(dest).expect("listed above");
            entry.metric = INFINITE_METRIC;
            entry.sequence |= 1;
            entry.installed_at = now;
            let sequence = entry.sequence;
            self.settling.remove(&dest);
            self.set_advert(
                dest,
                Advert {
                    metric: INFINITE_METRIC,
                    sequence,
                },
            );
            any_active |= self.is_active(dest, now);
        }
        any_active
    }

    fn on_link_break(&mut self, now: SimTime, broken: &[NodeId], fx: &mut Effects) {
        let mut active = false;
        for &b in broken {
            active |= self.invalidate_via(now, b);
        }
        if active {
            fx.note(Note::ActiveRouteBreak);
            self.request_trigger(now, fx);
        }
    }

    /// Injects a link failure as if the loss threshold had been reached.
    pub fn break_link(&mut self, now: SimTime, neighbor: NodeId, fx: &mut Effects) {
        if self.links.force_break(neighbor) {
            self.on_link_break(now, &[neighbor], fx);
        }
    }

    pub fn process_update(&mut self, now: SimTime, via: NodeId, update: &DsdvUpdate, fx: &mut Effects) {
        if via == self.id {
            return;
        }
        if update.entries.iter().any(|e| e.metric < 0) {
            self.stats.malformed += 1;
            fx.note(Note::MalformedUpdate);
            return;
        }
        if self.links.note_control_heard(via, now).is_err() {
            return;
        }
        let mut trigger = false;
        for e in &update.entries {
            if e.destination != self.id {
                trigger |= self.process_entry(now, via, e);
            }
        }
        if trigger {
            fx.note(Note::ActiveRouteBreak);
            self.request_trigger(now, fx);
        }
    }

    /// Applies one advertised entry. Returns true when it broke an active route.
    fn process_entry(&mut self, now: SimTime, via: NodeId, e: &DsdvEntry) -> bool {
        let dest = e.destination;
        let broken = e.metric == WIRE_INFINITY || e.sequence % 2 == 1;
        let metric = if broken { INFINITE_METRIC } else { e.metric as u32 + 1 };
        let current = self.table.entry(dest).cloned();

        let accept = match &current {
            None => !broken,
            Some(cur) => e.sequence > cur.sequence || (e.sequence == cur.sequence && metric < cur.metric),
        };

        if !accept {
            // A repeat of the installed route still counts as a confirmation.
            if let Some(cur) = &current {
                if cur.next_hop == via && cur.metric == metric && cur.sequence == e.sequence {
                    self.confirm(now, cur.clone());
                }
            }
            return false;
        }

        if broken {
            let cur = current.expect("broken entries are only accepted over an existing route");
            let was_valid = cur.is_valid();
            self.table.insert(RouteEntry {
                destination: dest,
                next_hop: cur.next_hop,
                metric: INFINITE_METRIC,
                sequence: e.sequence,
                installed_at: now,
            });
            self.settling.remove(&dest);
            self.set_advert(
                dest,
                Advert {
                    metric: INFINITE_METRIC,
                    sequence: e.sequence,
                },
            );
            return was_valid && self.is_active(dest, now);
        }

        let entry = RouteEntry {
            destination: dest,
            next_hop: via,
            metric,
            sequence: e.sequence,
            installed_at: now,
        };
        self.table.insert(entry.clone());
        self.confirm(now, entry);
        false
    }

    /// Records one sighting of the installed route and decides whether it
    /// may be advertised yet.
    fn confirm(&mut self, now: SimTime, entry: RouteEntry) {
        let dest = entry.destination;
        let advert = Advert {
            metric: entry.metric,
            sequence: entry.sequence,
        };
        let immediate = match self.advertised.get(&dest) {
            None => true,
            Some(prev) => prev.metric == INFINITE_METRIC || entry.metric >= prev.metric,
        };
        if immediate {
            self.settling.remove(&dest);
            self.set_advert(dest, advert);
            return;
        }
        let record = self
            .settling
            .entry(dest)
            .and_modify(|r| {
                let same = r.best_candidate.next_hop == entry.next_hop && r.best_candidate.metric == entry.metric;
                if same {
                    r.samples += 1;
                } else {
                    r.first_seen = now;
                    r.samples = 1;
                }
                r.best_candidate = entry.clone();
            })
            .or_insert_with(|| SettlingRecord {
                destination: dest,
                best_candidate: entry.clone(),
                first_seen: now,
                samples: 1,
            });
        if record.samples >= self.config.settling_count {
            self.settling.remove(&dest);
            self.set_advert(dest, advert);
        }
    }

    fn link_tick(&mut self, now: SimTime, fx: &mut Effects) {
        let broken = self.links.link_interval_tick();
        fx.timer(now + SimTime::from_secs(self.config.periodic_interval), Timer::LinkTick);
        if !broken.is_empty() {
            self.on_link_break(now, &broken, fx);
        }
    }
}

impl RoutingProtocol for Dsdv {
    fn id(&self) -> NodeId {
        self.id
    }

    fn start(&mut self, fx: &mut Effects) {
        let period = SimTime::from_secs(self.config.periodic_interval);
        fx.timer(period, Timer::DsdvPeriodic);
        fx.timer(period, Timer::LinkTick);
    }

    fn on_timer(&mut self, now: SimTime, timer: Timer, fx: &mut Effects) {
        match timer {
            Timer::DsdvPeriodic => self.periodic(now, fx),
            Timer::DsdvTrigger => self.deferred_trigger(now, fx),
            Timer::LinkTick => self.link_tick(now, fx),
            _ => {}
        }
    }

    fn on_control(&mut self, now: SimTime, from: NodeId, packet: &ControlPacket, fx: &mut Effects) {
        if let ControlPacket::Dsdv(u) = packet {
            self.process_update(now, from, u, fx);
        }
    }

    fn routes(&mut self, _now: SimTime) -> &RouteTable {
        &self.table
    }

    fn note_data_sent(&mut self, destination: NodeId, now: SimTime) {
        self.active.insert(destination, now);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn n(i: u32) -> NodeId {
        NodeId(i)
    }

    fn t(s: f64) -> SimTime {
        SimTime::from_secs(s)
    }

    fn update(origin: u32, entries: &[(u32, i32, u64)]) -> DsdvUpdate {
        DsdvUpdate {
            origin: n(origin),
            full_dump: false,
            entries: entries
                .iter()
                .map(|&(d, m, s)| DsdvEntry {
                    destination: n(d),
                    metric: m,
                    sequence: s,
                })
                .collect(),
        }
    }

    fn sent(fx: &Effects) -> Vec<&DsdvUpdate> {
        fx.broadcasts
            .iter()
            .map(|(p, _)| match p {
                ControlPacket::Dsdv(u) => u,
                _ => panic!("not a DSDV update"),
            })
            .collect()
    }

    #[test]
    fn quiet_periodic_update_carries_only_own_entry() {
        let mut node = Dsdv::new(n(0), DsdvConfig::original());
        let mut fx = Effects::new();
        node.on_timer(t(15.0), Timer::DsdvPeriodic, &mut fx);
        let u = sent(&fx)[0];
        assert!(!u.full_dump);
        assert_eq!(u.entries, vec![DsdvEntry { destination: n(0), metric: 0, sequence: 2 }]);
        assert_eq!(fx.timers, vec![(t(30.0), Timer::DsdvPeriodic)]);
    }

    #[test]
    fn own_sequence_advances_by_two() {
        let mut node = Dsdv::new(n(0), DsdvConfig::original());
        let mut fx = Effects::new();
        node.on_timer(t(15.0), Timer::DsdvPeriodic, &mut fx);
        node.on_timer(t(30.0), Timer::DsdvPeriodic, &mut fx);
        assert_eq!(node.own_sequence(), 4);
        node.on_timer(t(45.0), Timer::DsdvPeriodic, &mut fx);
        assert_eq!(sent(&fx)[2].entries[0].sequence, 6);
    }

    #[test]
    fn too_many_changes_force_a_full_dump() {
        let config = DsdvConfig {
            npdu_capacity: 2,
            ..DsdvConfig::original()
        };
        let mut node = Dsdv::new(n(0), config);
        let mut fx = Effects::new();
        node.process_update(t(1.0), n(1), &update(1, &[(1, 0, 2), (2, 1, 2), (3, 2, 2)]), &mut fx);
        node.on_timer(t(15.0), Timer::DsdvPeriodic, &mut fx);
        let u = sent(&fx)[0];
        assert!(u.full_dump);
        assert_eq!(u.entries.len(), 4);
    }

    #[test]
    fn newer_sequence_wins_even_with_worse_metric() {
        let mut node = Dsdv::new(n(0), DsdvConfig::original());
        let mut fx = Effects::new();
        node.process_update(t(1.0), n(1), &update(1, &[(9, 2, 10)]), &mut fx);
        node.process_update(t(2.0), n(2), &update(2, &[(9, 4, 12)]), &mut fx);
        let r = node.table().lookup(n(9)).unwrap();
        assert_eq!((r.next_hop, r.metric, r.sequence), (n(2), 5, 12));
    }

    #[test]
    fn equal_sequence_better_metric_wins() {
        let mut node = Dsdv::new(n(0), DsdvConfig::original());
        let mut fx = Effects::new();
        node.process_update(t(1.0), n(1), &update(1, &[(9, 2, 10)]), &mut fx);
        node.process_update(t(2.0), n(2), &update(2, &[(9, 1, 10)]), &mut fx);
        let r = node.table().lookup(n(9)).unwrap();
        assert_eq!((r.next_hop, r.metric), (n(2), 2));
    }

    #[test]
    fn odd_sequence_invalidates_and_triggers_when_active() {
        let mut node = Dsdv::new(n(0), DsdvConfig::original());
        let mut fx = Effects::new();
        node.process_update(t(1.0), n(1), &update(1, &[(9, 2, 10)]), &mut fx);
        node.note_data_sent(n(9), t(2.0));
        let mut fx = Effects::new();
        node.process_update(t(3.0), n(1), &update(1, &[(9, WIRE_INFINITY, 11)]), &mut fx);
        assert!(node.table().lookup(n(9)).is_none());
        assert_eq!(node.table().entry(n(9)).unwrap().sequence, 11);
        assert_eq!(fx.count(ControlKind::DsdvTrigger), 1);
        let u = sent(&fx)[0];
        assert!(u.entries.contains(&DsdvEntry { destination: n(9), metric: WIRE_INFINITY, sequence: 11 }));
    }

    #[test]
    fn negative_metric_discards_packet() {
        let mut node = Dsdv::new(n(0), DsdvConfig::original());
        let mut fx = Effects::new();
        node.process_update(t(1.0), n(1), &update(1, &[(1, 0, 2), (9, -1, 4)]), &mut fx);
        assert!(node.table().is_empty());
        assert_eq!(fx.notes, vec![Note::MalformedUpdate]);
        assert_eq!(node.stats().malformed, 1);
    }

    #[test]
    fn improvement_is_advertised_only_after_settling() {
        let mut node = Dsdv::new(n(0), DsdvConfig::original());
        let mut fx = Effects::new();
        node.process_update(t(1.0), n(1), &update(1, &[(9, 3, 10)]), &mut fx);
        assert_eq!(node.advertised(n(9)), Some((4, 10)));
        // A shorter path shows up and is used for forwarding at once.
        for k in 0..5u64 {
            node.process_update(t(2.0 + k as f64), n(2), &update(2, &[(9, 1, 12 + 2 * k)]), &mut fx);
            assert_eq!(node.table().lookup(n(9)).unwrap().next_hop, n(2));
            assert_eq!(node.advertised(n(9)), Some((4, 10)));
            assert_eq!(node.settling(n(9)).unwrap().samples, k as u32 + 1);
        }
        node.process_update(t(7.0), n(2), &update(2, &[(9, 1, 20)]), &mut fx);
        assert_eq!(node.advertised(n(9)), Some((2, 20)));
        assert!(node.settling(n(9)).is_none());
    }

    #[test]
    fn break_without_active_route_is_silent() {
        let mut node = Dsdv::new(n(0), DsdvConfig::original());
        let mut fx = Effects::new();
        node.process_update(t(1.0), n(1), &update(1, &[(1, 0, 2), (9, 1, 10)]), &mut fx);
        let mut fx = Effects::new();
        node.break_link(t(5.0), n(1), &mut fx);
        assert!(node.table().lookup(n(9)).is_none());
        assert_eq!(node.table().entry(n(9)).unwrap().sequence, 11);
        assert_eq!(node.table().entry(n(1)).unwrap().sequence, 3);
        assert!(fx.broadcasts.is_empty());
    }

    #[test]
    fn break_on_active_route_triggers_immediately() {
        let mut node = Dsdv::new(n(0), DsdvConfig::original());
        let mut fx = Effects::new();
        node.process_update(t(1.0), n(1), &update(1, &[(1, 0, 2), (9, 1, 10)]), &mut fx);
        node.note_data_sent(n(9), t(4.0));
        let mut fx = Effects::new();
        node.break_link(t(5.0), n(1), &mut fx);
        assert_eq!(fx.count(ControlKind::DsdvTrigger), 1);
        assert!(fx.notes.contains(&Note::ActiveRouteBreak));
    }

    #[test]
    fn silence_breaks_link_after_three_ticks() {
        let mut node = Dsdv::new(n(0), DsdvConfig::original());
        let mut fx = Effects::new();
        node.process_update(t(1.0), n(1), &update(1, &[(1, 0, 2)]), &mut fx);
        for k in 1..=4 {
            node.on_timer(t(15.0 * k as f64), Timer::LinkTick, &mut fx);
        }
        assert!(node.table().lookup(n(1)).is_none());
    }

    #[test]
    fn trigger_spacing_suppresses_second_break() {
        let mut node = Dsdv::new(n(0), DsdvConfig::modified());
        let mut fx = Effects::new();
        node.process_update(t(1.0), n(1), &update(1, &[(1, 0, 2), (8, 1, 10)]), &mut fx);
        node.process_update(t(1.0), n(2), &update(2, &[(2, 0, 2), (9, 1, 10)]), &mut fx);
        node.note_data_sent(n(8), t(9.0));
        node.note_data_sent(n(9), t(14.0));
        let mut fx = Effects::new();
        node.break_link(t(10.0), n(1), &mut fx);
        node.break_link(t(15.0), n(2), &mut fx);
        assert_eq!(fx.count(ControlKind::DsdvTrigger), 1);
        assert_eq!(fx.timers, vec![(t(40.0), Timer::DsdvTrigger)]);
        let mut later = Effects::new();
        node.on_timer(t(40.0), Timer::DsdvTrigger, &mut later);
        assert_eq!(later.count(ControlKind::DsdvTrigger), 1);
    }

    #[test]
    fn forced_break_script_respects_trigger_budget() {
        // One active route breaks every 5 s for 300 s.
        let span = 300.0;
        let mut node = Dsdv::new(n(0), DsdvConfig::modified());
        let mut fx = Effects::new();
        let mut pending: Vec<(SimTime, Timer)> = Vec::new();
        let mut k = 0u32;
        let mut now = 0.0;
        while now < span {
            let nb = 100 + k;
            node.process_update(t(now), n(nb), &update(nb, &[(nb, 0, 2)]), &mut fx);
            node.note_data_sent(n(nb), t(now));
            node.break_link(t(now + 0.5), n(nb), &mut fx);
            pending.append(&mut fx.timers);
            pending.sort_by_key(|(at, _)| *at);
            while let Some(&(at, tm)) = pending.first() {
                if at > t(now + 5.0) {
                    break;
                }
                pending.remove(0);
                node.on_timer(at, tm, &mut fx);
                pending.append(&mut fx.timers);
                pending.sort_by_key(|(at, _)| *at);
            }
            k += 1;
            now += 5.0;
        }
        let triggers = fx.count(ControlKind::DsdvTrigger);
        assert!(triggers >= 1);
        assert!(triggers as f64 <= (span / 30.0).ceil(), "{triggers} triggers");
    }

    // Reference oracle: the update rules written as an explicit decision
    // table over (sequence order, parity, metric order).
    #[derive(Debug, Clone, Copy, PartialEq, Eq)]
    struct Slot {
        next_hop: u32,
        metric: u32,
        sequence: u64,
    }

    fn oracle(cur: Option<Slot>, via: u32, wire_metric: i32, seq: u64) -> Option<Slot> {
        let broken = seq % 2 == 1 || wire_metric == WIRE_INFINITY;
        let m = if broken { INFINITE_METRIC } else { wire_metric as u32 + 1 };
        match (cur, broken) {
            (None, true) => None,
            (None, false) => Some(Slot { next_hop: via, metric: m, sequence: seq }),
            (Some(c), _) if seq < c.sequence => Some(c),
            (Some(c), true) if seq == c.sequence => Some(c),
            (Some(c), true) => Some(Slot { next_hop: c.next_hop, metric: INFINITE_METRIC, sequence: seq }),
            (Some(c), false) if seq > c.sequence || m < c.metric => {
                Some(Slot { next_hop: via, metric: m, sequence: seq })
            }
            (Some(c), false) => Some(c),
        }
    }

    proptest! {
        // Node 1 on the chain 0-1-2-3 hears updates about 0 and 3 from its
        // two neighbors in arbitrary order.
        #[test]
        fn chain_node_matches_reference_table(
            script in prop::collection::vec((any::<bool>(), any::<bool>(), 0i32..4, 0u64..12, any::<bool>()), 1..40)
        ) {
            let mut node = Dsdv::new(n(1), DsdvConfig::original());
            let mut fx = Effects::new();
            let mut model: BTreeMap<u32, Option<Slot>> = BTreeMap::new();
            for (i, (left, about_far, metric, seq, infinite)) in script.into_iter().enumerate() {
                let via = if left { 0 } else { 2 };
                let dest = if about_far { 3 } else { 0 };
                let wire = if infinite { WIRE_INFINITY } else { metric };
                node.process_update(t(i as f64), n(via), &update(via, &[(dest, wire, seq)]), &mut fx);
                let slot = model.entry(dest).or_insert(None);
                *slot = oracle(*slot, via, wire, seq);
            }
            for (dest, slot) in model {
                let got = node.table().entry(n(dest)).map(|r| Slot {
                    next_hop: r.next_hop.0,
                    metric: r.metric,
                    sequence: r.sequence,
                });
                prop_assert_eq!(got, slot);
            }
        }

        #[test]
        fn installed_sequence_parity_matches_validity(
            script in prop::collection::vec((0u32..3, 0i32..5, 0u64..20, any::<bool>()), 1..40)
        ) {
            let mut node = Dsdv::new(n(9), DsdvConfig::original());
            let mut fx = Effects::new();
            for (i, (via, metric, seq, brk)) in script.into_iter().enumerate() {
                let now = t(i as f64);
                if brk {
                    node.break_link(now, n(via), &mut fx);
                } else {
                    node.process_update(now, n(via), &update(via, &[(via, 0, 2 * seq), (7, metric, seq)]), &mut fx);
                }
                for r in node.table().iter() {
                    prop_assert_eq!(r.is_valid(), r.sequence % 2 == 0);
                }
            }
        }
    }
}
