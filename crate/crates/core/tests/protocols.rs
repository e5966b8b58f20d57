//! Protocol behavior observed through complete simulations.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use manet_core::audit::AuditEvent;
use manet_core::config::MobilityKind;
use manet_core::experiment::{compare, run_scenario_with};
use manet_core::mobility::{random_placement, Position};
use manet_core::protocol::ControlKind;
use manet_core::sim::Simulation;
use manet_core::{NodeId, Preset, ProtocolKind, ScenarioConfig, SimTime};
use proptest::prelude::*;

fn quiet(protocol: ProtocolKind, nodes: usize, sim_time: f64, seed: u64) -> ScenarioConfig {
    let mut c = ScenarioConfig {
        protocol,
        nodes,
        sim_time,
        seed,
        placement_connected: true,
        ..ScenarioConfig::default()
    };
    c.area.width = 700.0;
    c.area.height = 700.0;
    c.mobility.model = MobilityKind::Static;
    c.radio.loss_probability = 0.0;
    c.traffic.num_flows = 0;
    c
}

fn hop_distances(positions: &[Position], range: f64, from: usize) -> Vec<Option<u32>> {
    let mut dist = vec![None; positions.len()];
    dist[from] = Some(0);
    let mut queue = VecDeque::from([from]);
    while let Some(u) = queue.pop_front() {
        for v in 0..positions.len() {
            if dist[v].is_none() && positions[u].distance(&positions[v]) <= range {
                dist[v] = Some(dist[u].unwrap() + 1);
                queue.push_back(v);
            }
        }
    }
    dist
}

fn placement(c: &ScenarioConfig) -> Vec<Position> {
    random_placement(c.area, c.nodes, c.radio.range, c.placement_connected, c.seed).unwrap()
}

/// Every route metric equals the true hop distance in the unit-disk graph.
fn assert_shortest_routes(sim: &mut Simulation, positions: &[Position]) {
    let now = sim.now();
    let n = positions.len();
    for i in 0..n {
        let truth = hop_distances(positions, 250.0, i);
        let table = sim.router_mut(NodeId(i as u32)).routes(now).clone();
        for (j, d) in truth.iter().enumerate() {
            if i == j {
                continue;
            }
            let entry = table.lookup(NodeId(j as u32));
            let metric = entry.map(|e| e.metric);
            assert_eq!(metric, *d, "route {i} -> {j}");
        }
    }
}

#[test]
fn static_networks_converge_to_shortest_paths() {
    for protocol in ProtocolKind::ALL {
        for seed in 1..=3 {
            let c = quiet(protocol, 14, 200.0, seed);
            let positions = placement(&c);
            let mut sim = Simulation::with_positions(c, &positions).unwrap();
            sim.run_until(SimTime::from_secs(200.0));
            assert_shortest_routes(&mut sim, &positions);
        }
    }
}

#[test]
fn dsdv_periodic_count_is_exact_on_static_networks() {
    for preset in Preset::ALL {
        let mut c = quiet(ProtocolKind::Dsdv, 10, 300.0, 4);
        c.preset = preset;
        let out = run_scenario_with(c, false).unwrap();
        assert_eq!(out.counters.control(ControlKind::DsdvPeriodic), 10 * 20);
        assert_eq!(out.counters.control(ControlKind::DsdvTrigger), 0);
    }
}

#[test]
fn fsr_sends_only_its_own_periodic_updates() {
    for preset in Preset::ALL {
        let mut c = quiet(ProtocolKind::Fsr, 10, 120.0, 6);
        c.preset = preset;
        let cfg = c.fsr_config();
        let out = run_scenario_with(c, true).unwrap();
        let per_node = (120.0 / cfg.inner_interval).floor() as u64 + (120.0 / cfg.outer_interval).floor() as u64;
        let emitted: u64 = out.stats.control_originated.values().sum();
        assert_eq!(emitted, 10 * per_node);
        // A frame queued behind another at the final instant is never sent.
        let sent = out.counters.control_total();
        assert!(sent <= emitted && emitted - sent <= 10, "{sent} of {emitted}");
        for r in out.audit.as_ref().unwrap() {
            if let AuditEvent::ControlTx { node, kind, origin, .. } = r.event {
                assert_eq!(node, origin);
                assert!(matches!(kind, ControlKind::FsrInner | ControlKind::FsrOuter));
            }
        }
    }
}

#[test]
fn fsr_single_scope_prediction_matches() {
    let mut c = quiet(ProtocolKind::Fsr, 8, 100.0, 2);
    c.protocol_overrides.insert("fsr.inner_interval".into(), 10.0);
    c.protocol_overrides.insert("fsr.outer_interval".into(), 10.0);
    let out = run_scenario_with(c, false).unwrap();
    let cmp = compare(&out).unwrap();
    assert_eq!(cmp.predicted_control_tx, 8.0 * 100.0 * 2.0 / 10.0);
    let emitted: u64 = out.stats.control_originated.values().sum();
    assert_eq!(emitted as f64, cmp.predicted_control_tx);
    assert!(cmp.abs_deviation <= 8.0, "{cmp:?}");
}

#[test]
fn olsr_overhead_decomposes_by_kind() {
    let c = quiet(ProtocolKind::Olsr, 15, 100.0, 3);
    let out = run_scenario_with(c, false).unwrap();
    let k = &out.counters;
    let parts = k.control(ControlKind::Hello)
        + k.control(ControlKind::TcPeriodic)
        + k.control(ControlKind::TcTrigger)
        + k.control(ControlKind::TcForward);
    assert_eq!(k.control_total(), parts);
    assert_eq!(out.stats.control_originated[&ControlKind::Hello], 15 * 50);
    assert!(15 * 50 - k.control(ControlKind::Hello) <= 15);
}

#[test]
fn olsr_tc_relays_are_bounded_by_selected_nodes() {
    for seed in 1..=5 {
        let c = quiet(ProtocolKind::Olsr, 20, 100.0, seed);
        let out = run_scenario_with(c, true).unwrap();
        let log = out.audit.unwrap();
        let selected = out.stats.last_census.iter().filter(|&&s| s > 0).count();
        let warm = SimTime::from_secs(40.0);
        let mut per_tc: BTreeMap<(NodeId, u64), (u64, BTreeSet<NodeId>)> = BTreeMap::new();
        for r in &log {
            match r.event {
                AuditEvent::ControlTx {
                    kind: ControlKind::TcPeriodic | ControlKind::TcTrigger,
                    origin,
                    sequence,
                    ..
                } if r.at >= warm => {
                    per_tc.insert((origin, sequence), (1, BTreeSet::new()));
                }
                AuditEvent::ControlTx {
                    kind: ControlKind::TcForward,
                    node,
                    origin,
                    sequence,
                    ..
                } => {
                    assert_ne!(node, origin, "origin relayed its own TC");
                    if let Some((tx, relays)) = per_tc.get_mut(&(origin, sequence)) {
                        assert!(relays.insert(node), "{node} relayed ({origin}, {sequence}) twice");
                        *tx += 1;
                    }
                }
                _ => {}
            }
        }
        assert!(!per_tc.is_empty());
        for ((origin, seq), (tx, _)) in per_tc {
            assert!(tx as usize <= selected + 1, "seed {seed}: tc ({origin}, {seq}) sent {tx} times, {selected} selected");
        }
    }
}

#[test]
fn olsr_neighbor_sets_are_symmetric() {
    let c = quiet(ProtocolKind::Olsr, 16, 30.0, 8);
    let mut sim = Simulation::new(c).unwrap();
    sim.run_until(SimTime::from_secs(30.0));
    let sets: Vec<BTreeSet<NodeId>> = sim
        .routers()
        .iter()
        .map(|r| r.as_olsr().unwrap().neighbor_set().one_hop.clone())
        .collect();
    for (a, set) in sets.iter().enumerate() {
        for b in set {
            assert!(sets[b.index()].contains(&NodeId(a as u32)));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn dsdv_invariants_hold_under_mobility(seed in any::<u64>(), nodes in 4usize..12) {
        let mut c = ScenarioConfig {
            protocol: ProtocolKind::Dsdv,
            nodes,
            sim_time: 60.0,
            seed,
            ..ScenarioConfig::default()
        };
        c.area.width = 600.0;
        c.area.height = 600.0;
        c.traffic.num_flows = nodes.min(5);
        c.traffic.stagger = 2.0;
        let mut sim = Simulation::new(c).unwrap();
        let mut own: Vec<u64> = vec![0; nodes];
        while sim.step().is_some() {
            prop_assert!(sim.dsdv_loops().is_empty());
            for (i, r) in sim.routers().iter().enumerate() {
                let d = r.as_dsdv().unwrap();
                prop_assert!(d.own_sequence() >= own[i]);
                prop_assert_eq!(d.own_sequence() % 2, 0);
                own[i] = d.own_sequence();
                for e in d.table().iter() {
                    if e.destination.index() == i {
                        continue;
                    }
                    // Reachable entries carry even sequences, invalidated ones odd.
                    prop_assert_eq!(e.sequence % 2 == 0, e.is_valid(), "{:?}", e);
                }
            }
        }
    }
}
