//! The simulation engine: one event queue driving every node's routing
//! protocol, transmit queue, traffic sources and the shared radio.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::analytics::{compute_metrics, AnalyticParams, Counters, MetricsReport};
use crate::audit::{control_identity, AuditEvent, AuditRecord};
use crate::config::{ConfigError, ProtocolKind, ScenarioConfig};
use crate::dsdv::Dsdv;
use crate::fsr::Fsr;
use crate::kernel::{EventKind, EventQueue, SimEvent, SimTime};
use crate::mobility::{random_placement, Mobility, MobilityModel, PlacementError, Position};
use crate::olsr::Olsr;
use crate::protocol::{ControlKind, Effects, Note, RoutingProtocol, Timer};
use crate::radio::{Radio, TxQueue, UnicastOutcome};
use crate::routing::{forward_data, DataPacket, DropCause, ForwardAction, RouteTable};
use crate::traffic::{build_flows, CbrFlow, TrafficError};
use crate::wire::ControlPacket;
use crate::NodeId;

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Placement(#[from] PlacementError),
    #[error(transparent)]
    Traffic(#[from] TrafficError),
    #[error("{given} initial positions for {nodes} nodes")]
    PositionCount { given: usize, nodes: usize },
}

/// A node's routing protocol instance.
pub enum Router {
    Dsdv(Dsdv),
    Fsr(Fsr),
    Olsr(Olsr),
}

impl Router {
    pub fn new(id: NodeId, config: &ScenarioConfig) -> Self {
        match config.protocol {
            ProtocolKind::Dsdv => Router::Dsdv(Dsdv::new(id, config.dsdv_config())),
            ProtocolKind::Fsr => Router::Fsr(Fsr::new(id, config.fsr_config())),
            ProtocolKind::Olsr => Router::Olsr(Olsr::new(id, config.olsr_config())),
        }
    }

    fn inner(&mut self) -> &mut dyn RoutingProtocol {
        match self {
            Router::Dsdv(p) => p,
            Router::Fsr(p) => p,
            Router::Olsr(p) => p,
        }
    }

    pub fn as_dsdv(&self) -> Option<&Dsdv> {
        match self {
            Router::Dsdv(p) => Some(p),
            _ => None,
        }
    }

    pub fn as_fsr_mut(&mut self) -> Option<&mut Fsr> {
        match self {
            Router::Fsr(p) => Some(p),
            _ => None,
        }
    }

    pub fn as_olsr(&self) -> Option<&Olsr> {
        match self {
            Router::Olsr(p) => Some(p),
            _ => None,
        }
    }

    pub fn routes(&mut self, now: SimTime) -> &RouteTable {
        self.inner().routes(now)
    }
}

#[derive(Debug, Clone)]
pub enum Frame {
    Control {
        packet: Arc<ControlPacket>,
        kind: ControlKind,
    },
    Data {
        packet: DataPacket,
        next_hop: NodeId,
    },
}

#[derive(Debug, Clone)]
pub enum Payload {
    DeliverControl {
        from: NodeId,
        packet: Arc<ControlPacket>,
        kind: ControlKind,
    },
    DeliverData {
        from: NodeId,
        packet: DataPacket,
    },
    TxComplete,
    Timer(Timer),
    Traffic {
        flow: usize,
        k: u64,
    },
    Mobility,
}

impl Payload {
    pub fn kind(&self) -> EventKind {
        match self {
            Payload::DeliverControl { .. } | Payload::DeliverData { .. } => EventKind::PacketDelivery,
            Payload::TxComplete | Payload::Timer(_) => EventKind::Timer,
            Payload::Traffic { .. } => EventKind::TrafficGeneration,
            Payload::Mobility => EventKind::MobilityUpdate,
        }
    }
}

/// Protocol-level observations accumulated over a run.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SimStats {
    /// Control messages handed to the transmit queue, by kind.
    pub control_originated: BTreeMap<ControlKind, u64>,
    /// Control frames lost to a full transmit queue.
    pub control_queue_drops: u64,
    /// Periodic TC ticks at which the node had at least one selector.
    pub census_selected_ticks: u64,
    /// Selector count of each node at its latest periodic TC tick.
    pub last_census: Vec<usize>,
    pub mpr_changes: u64,
    pub active_route_breaks: u64,
    pub malformed_updates: u64,
}

/// Everything a finished run produced.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub counters: Counters,
    pub stats: SimStats,
    /// Data packets still queued or on the air when the run ended.
    pub in_flight: u64,
    pub dispatched: u64,
    pub sim_time: f64,
    pub audit: Option<Vec<AuditRecord>>,
}

impl RunResult {
    pub fn metrics(&self) -> MetricsReport {
        compute_metrics(&self.counters, self.sim_time)
    }
}

pub struct Simulation {
    config: ScenarioConfig,
    end: SimTime,
    queue: EventQueue<Payload>,
    mobility: Mobility,
    radio: Radio,
    routers: Vec<Router>,
    tx: Vec<TxQueue<Frame>>,
    flows: Vec<CbrFlow>,
    next_packet: u64,
    counters: Counters,
    stats: SimStats,
    audit: Option<Vec<AuditRecord>>,
}

impl Simulation {
    /// Validates `config`, places nodes and schedules the start of every
    /// protocol and flow.
    pub fn new(config: ScenarioConfig) -> Result<Self, SimError> {
        config.validate()?;
        let positions = random_placement(
            config.area,
            config.nodes,
            config.radio.range,
            config.placement_connected,
            config.seed,
        )?;
        Self::with_positions(config, &positions)
    }

    /// Like [`Simulation::new`] with a fixed initial placement.
    pub fn with_positions(config: ScenarioConfig, positions: &[Position]) -> Result<Self, SimError> {
        config.validate()?;
        if positions.len() != config.nodes {
            return Err(SimError::PositionCount {
                given: positions.len(),
                nodes: config.nodes,
            });
        }
        let end = SimTime::from_secs(config.sim_time);
        let flows = build_flows(config.nodes, &config.traffic, end, config.seed)?;
        let mobility = Mobility::new(config.area, config.mobility_model(), positions, config.seed);
        let radio = Radio::new(config.radio.clone(), config.seed);
        let routers = (0..config.nodes)
            .map(|i| Router::new(NodeId(i as u32), &config))
            .collect();
        let tx = (0..config.nodes)
            .map(|_| TxQueue::new(config.radio.queue_capacity))
            .collect();
        let mut sim = Simulation {
            end,
            queue: EventQueue::new(),
            mobility,
            radio,
            routers,
            tx,
            flows,
            next_packet: 0,
            counters: Counters::default(),
            stats: SimStats {
                last_census: vec![0; config.nodes],
                ..SimStats::default()
            },
            audit: None,
            config,
        };
        sim.bootstrap();
        Ok(sim)
    }

    fn bootstrap(&mut self) {
        for i in 0..self.routers.len() {
            let node = NodeId(i as u32);
            let mut fx = Effects::new();
            self.routers[i].inner().start(&mut fx);
            self.apply(node, fx);
            if let MobilityModel::RandomWaypoint { .. } = self.config.mobility_model() {
                self.schedule_mobility(node);
            }
        }
        for (i, flow) in self.flows.iter().enumerate() {
            if let Some(at) = flow.emission(0) {
                self.queue
                    .schedule(at, flow.source, Payload::Traffic { flow: i, k: 0 })
                    .expect("run starts at zero");
            }
        }
    }

    /// Turns on the audit log; call before running.
    pub fn enable_audit(&mut self) {
        self.audit.get_or_insert_with(Vec::new);
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.config
    }

    pub fn now(&self) -> SimTime {
        self.queue.now()
    }

    pub fn end(&self) -> SimTime {
        self.end
    }

    pub fn routers(&self) -> &[Router] {
        &self.routers
    }

    pub fn router_mut(&mut self, node: NodeId) -> &mut Router {
        &mut self.routers[node.index()]
    }

    pub fn flows(&self) -> &[CbrFlow] {
        &self.flows
    }

    pub fn counters(&self) -> &Counters {
        &self.counters
    }

    pub fn stats(&self) -> &SimStats {
        &self.stats
    }

    pub fn position(&mut self, node: NodeId) -> Position {
        let now = self.now();
        self.mobility.position_at(node, now)
    }

    fn record(&mut self, event: AuditEvent) {
        if let Some(log) = &mut self.audit {
            log.push(AuditRecord {
                at: self.queue.now(),
                event,
            });
        }
    }

    fn schedule_at(&mut self, at: SimTime, node: NodeId, payload: Payload) {
        self.queue
            .schedule(at, node, payload)
            .expect("engine never schedules into the past");
    }

    fn schedule_mobility(&mut self, node: NodeId) {
        if let Some(at) = self.mobility.leg_end(node) {
            let at = at.max(self.now());
            self.schedule_at(at, node, Payload::Mobility);
        }
    }

    fn apply(&mut self, node: NodeId, fx: Effects) {
        for note in fx.notes {
            match note {
                Note::SelectorCensus { selectors } => {
                    if selectors > 0 {
                        self.stats.census_selected_ticks += 1;
                    }
                    self.stats.last_census[node.index()] = selectors;
                    self.record(AuditEvent::Census { node, selectors });
                }
                Note::MprChange => self.stats.mpr_changes += 1,
                Note::ActiveRouteBreak => self.stats.active_route_breaks += 1,
                Note::MalformedUpdate => self.stats.malformed_updates += 1,
            }
        }
        for (at, timer) in fx.timers {
            self.schedule_at(at, node, Payload::Timer(timer));
        }
        for (packet, kind) in fx.broadcasts {
            *self.stats.control_originated.entry(kind).or_default() += 1;
            self.send(
                node,
                Frame::Control {
                    packet: Arc::new(packet),
                    kind,
                },
            );
        }
    }

    fn send(&mut self, node: NodeId, frame: Frame) {
        match self.tx[node.index()].offer(frame) {
            Ok(Some(frame)) => self.start_tx(node, frame),
            Ok(None) => {}
            Err(Frame::Data { packet, .. }) => self.drop_data(node, packet.id, DropCause::Queue),
            Err(Frame::Control { .. }) => self.stats.control_queue_drops += 1,
        }
    }

    fn drop_data(&mut self, node: NodeId, packet: u64, cause: DropCause) {
        *self.counters.drops.entry(cause).or_default() += 1;
        self.record(AuditEvent::Dropped { node, packet, cause });
    }

    fn start_tx(&mut self, node: NodeId, frame: Frame) {
        let now = self.now();
        let tx_end = match frame {
            Frame::Control { packet, kind } => {
                let bytes = packet.encoded_len();
                *self.counters.control_tx.entry(kind).or_default() += 1;
                let (origin, sequence) = control_identity(&packet);
                self.record(AuditEvent::ControlTx {
                    node,
                    kind,
                    bytes,
                    origin,
                    sequence,
                });
                let tx = self.radio.broadcast(&mut self.mobility, node, bytes, now);
                for d in tx.deliveries {
                    self.schedule_at(
                        d.at,
                        d.to,
                        Payload::DeliverControl {
                            from: node,
                            packet: Arc::clone(&packet),
                            kind,
                        },
                    );
                }
                tx.tx_end
            }
            Frame::Data { packet, next_hop } => {
                self.routers[node.index()]
                    .inner()
                    .note_data_sent(packet.destination, now);
                self.record(AuditEvent::DataTx {
                    node,
                    packet: packet.id,
                    next_hop,
                });
                let (tx_end, outcome) =
                    self.radio
                        .unicast(&mut self.mobility, node, next_hop, packet.size, now);
                match outcome {
                    UnicastOutcome::Delivered(d) => {
                        self.schedule_at(d.at, d.to, Payload::DeliverData { from: node, packet })
                    }
                    UnicastOutcome::OutOfRange | UnicastOutcome::Lost => {
                        self.drop_data(node, packet.id, DropCause::Link)
                    }
                }
                tx_end
            }
        };
        self.schedule_at(tx_end, node, Payload::TxComplete);
    }

    /// Routes a data packet that is at `node`, either delivering it or
    /// handing it to the transmit queue.
    fn route_data(&mut self, node: NodeId, mut packet: DataPacket) {
        let now = self.now();
        let ttl = self.config.ttl;
        let table = self.routers[node.index()].routes(now);
        match forward_data(node, &mut packet, table, ttl) {
            ForwardAction::Deliver => {
                let delay = now - packet.created_at;
                self.counters.delivered += 1;
                self.counters.delivered_bytes += packet.size as u64;
                self.counters.delay_sum_ns += u128::from(delay.as_nanos());
                self.record(AuditEvent::Delivered {
                    node,
                    packet: packet.id,
                    bytes: packet.size,
                    delay_ns: delay.as_nanos(),
                });
            }
            ForwardAction::Transmit { next_hop } => self.send(node, Frame::Data { packet, next_hop }),
            ForwardAction::Drop(cause) => self.drop_data(node, packet.id, cause),
        }
    }

    fn dispatch(&mut self, event: SimEvent<Payload>) {
        let node = event.target;
        let now = event.fire_at;
        match event.payload {
            Payload::DeliverControl { from, packet, kind } => {
                let (origin, sequence) = control_identity(&packet);
                self.record(AuditEvent::ControlRx {
                    node,
                    from,
                    kind,
                    origin,
                    sequence,
                });
                let mut fx = Effects::new();
                self.routers[node.index()]
                    .inner()
                    .on_control(now, from, &packet, &mut fx);
                self.apply(node, fx);
            }
            Payload::DeliverData { packet, .. } => self.route_data(node, packet),
            Payload::TxComplete => {
                if let Some(frame) = self.tx[node.index()].complete() {
                    self.start_tx(node, frame);
                }
            }
            Payload::Timer(timer) => {
                let mut fx = Effects::new();
                self.routers[node.index()].inner().on_timer(now, timer, &mut fx);
                self.apply(node, fx);
            }
            Payload::Traffic { flow, k } => {
                let f = &self.flows[flow];
                let packet = DataPacket {
                    id: self.next_packet,
                    source: f.source,
                    destination: f.destination,
                    size: f.packet_size,
                    created_at: now,
                    hops_traversed: 0,
                };
                if let Some(next) = f.emission(k + 1) {
                    self.schedule_at(next, node, Payload::Traffic { flow, k: k + 1 });
                }
                self.next_packet += 1;
                self.counters.generated += 1;
                self.record(AuditEvent::Generated {
                    node,
                    packet: packet.id,
                    destination: packet.destination,
                    bytes: packet.size,
                });
                self.route_data(node, packet);
            }
            Payload::Mobility => {
                self.mobility.advance(node, now + SimTime::from_nanos(1));
                self.schedule_mobility(node);
            }
        }
    }

    /// Dispatches the next event due by the end of the run. Returns its
    /// time and kind, or `None` once the run is over.
    pub fn step(&mut self) -> Option<(SimTime, EventKind)> {
        let event = self.queue.pop_due(self.end)?;
        let info = (event.fire_at, event.payload.kind());
        self.dispatch(event);
        Some(info)
    }

    pub fn run_until(&mut self, t: SimTime) {
        let t = t.min(self.end);
        while let Some(event) = self.queue.pop_due(t) {
            self.dispatch(event);
        }
        self.queue.advance_to(t);
    }

    /// Data packets waiting in transmit queues or travelling between nodes.
    pub fn in_flight(&self) -> u64 {
        let queued: usize = self
            .tx
            .iter()
            .map(|q| q.waiting().filter(|f| matches!(f, Frame::Data { .. })).count())
            .sum();
        let airborne = self
            .queue
            .pending()
            .filter(|e| matches!(e.payload, Payload::DeliverData { .. }))
            .count();
        (queued + airborne) as u64
    }

    /// Runs to the configured end time.
    pub fn run(mut self) -> RunResult {
        self.run_until(self.end);
        self.into_result()
    }

    /// Analytic model inputs for this scenario, with the observed
    /// quantities (scope sizes, MPR sets, selector census, link and MPR
    /// changes) measured at the current time.
    pub fn analytic_params(&mut self) -> AnalyticParams {
        let n = self.routers.len() as f64;
        let now = self.now();
        let tau = self.config.sim_time;
        let dsdv = self.config.dsdv_config();
        let fsr = self.config.fsr_config();
        let olsr = self.config.olsr_config();
        let mut p = AnalyticParams {
            n,
            tau_nl: tau,
            tau_per: dsdv.periodic_interval,
            link_changes: self.stats.active_route_breaks as f64,
            tau_in: fsr.inner_interval,
            tau_out: fsr.outer_interval,
            tau_hello: olsr.hello_interval,
            tau_tc: olsr.tc_interval,
            ..AnalyticParams::default()
        };
        if n == 0.0 {
            return p;
        }
        let (mut n_in, mut n_out, mut nbr, mut mpr) = (0usize, 0usize, 0usize, 0usize);
        for r in &mut self.routers {
            if let Some(f) = r.as_fsr_mut() {
                let (i, o) = f.scope_partition(now);
                n_in += i.len();
                n_out += o.len();
            }
            if let Some(o) = r.as_olsr() {
                nbr += o.neighbor_set().one_hop.len();
                mpr += o.neighbor_set().mpr_set.len();
            }
        }
        p.n_in = n_in as f64 / n;
        p.n_out = n_out as f64 / n;
        p.avg_nbr = nbr as f64 / n;
        p.avg_mpr = mpr as f64 / n;
        p.mpr_changes = self.stats.mpr_changes as f64 / n;
        let ticks = (tau / olsr.tc_interval).floor();
        if ticks > 0.0 {
            p.n_selected = self.stats.census_selected_ticks as f64 / ticks;
        }
        p
    }

    pub fn into_result(self) -> RunResult {
        RunResult {
            in_flight: self.in_flight(),
            dispatched: self.queue.dispatched(),
            counters: self.counters,
            stats: self.stats,
            sim_time: self.config.sim_time,
            audit: self.audit,
        }
    }

    /// Destinations whose DSDV next-hop graph, restricted to valid entries
    /// that share a sequence number with their next hop's entry, has a cycle.
    pub fn dsdv_loops(&self) -> Vec<NodeId> {
        let tables: Vec<&RouteTable> = match self.routers.iter().map(|r| r.as_dsdv().map(Dsdv::table)).collect() {
            Some(t) => t,
            None => return Vec::new(),
        };
        let n = tables.len();
        let mut looping = Vec::new();
        for d in 0..n {
            let dest = NodeId(d as u32);
            let next = |i: usize| -> Option<usize> {
                let e = tables[i].lookup(dest)?;
                let j = e.next_hop.index();
                if j == d || j >= n {
                    return None;
                }
                let f = tables[j].lookup(dest)?;
                (f.sequence == e.sequence).then_some(j)
            };
            // 0 = unvisited, 1 = on current path, 2 = done.
            let mut state = vec![0u8; n];
            'start: for s in 0..n {
                let mut path = Vec::new();
                let mut cur = s;
                loop {
                    match state[cur] {
                        1 => {
                            looping.push(dest);
                            break 'start;
                        }
                        2 => break,
                        _ => {}
                    }
                    state[cur] = 1;
                    path.push(cur);
                    match next(cur) {
                        Some(j) => cur = j,
                        None => break,
                    }
                }
                for p in path {
                    state[p] = 2;
                }
            }
        }
        looping
    }
}
