//! Constant-bit-rate flows.

use rand::seq::index;
use rand::Rng;

use crate::kernel::SimTime;
use crate::rng::{self, Stream};
use crate::NodeId;

#[derive(Debug, Clone, PartialEq)]
pub struct CbrFlow {
    pub source: NodeId,
    pub destination: NodeId,
    /// Packets per second.
    pub rate: f64,
    pub packet_size: usize,
    pub start_at: SimTime,
    pub stop_at: SimTime,
}

impl CbrFlow {
    /// Emission time of the `k`-th packet, if it falls before `stop_at`.
    pub fn emission(&self, k: u64) -> Option<SimTime> {
        let offset = (k as f64 * 1e9 / self.rate).round() as u64;
        let at = self.start_at + SimTime::from_nanos(offset);
        (at < self.stop_at).then_some(at)
    }

    /// Packets emitted strictly before `end`.
    pub fn packets_before(&self, end: SimTime) -> u64 {
        let mut k = 0;
        while self.emission(k).is_some_and(|at| at < end) {
            k += 1;
        }
        k
    }

    /// Offered load in bits per second.
    pub fn offered_load(&self) -> f64 {
        self.rate * self.packet_size as f64 * 8.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowTemplate {
    pub num_flows: usize,
    pub rate: f64,
    pub packet_size: usize,
    /// Flow starts are drawn uniformly from `[0, stagger]` seconds.
    pub stagger: f64,
}

impl Default for FlowTemplate {
    fn default() -> Self {
        FlowTemplate {
            num_flows: 20,
            rate: 4.0,
            packet_size: 512,
            stagger: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TrafficError {
    #[error("{flows} flows requested but {nodes} nodes only have {pairs} ordered pairs")]
    TooManyFlows { flows: usize, nodes: usize, pairs: usize },
}

/// Draws `num_flows` distinct ordered source–destination pairs without
/// replacement. Fewer than two nodes yields no flows.
pub fn build_flows(
    nodes: usize,
    template: &FlowTemplate,
    stop_at: SimTime,
    seed: u64,
) -> Result<Vec<CbrFlow>, TrafficError> {
    let pairs = nodes * nodes.saturating_sub(1);
    if template.num_flows > pairs {
        return Err(TrafficError::TooManyFlows {
            flows: template.num_flows,
            nodes,
            pairs,
        });
    }
    let mut rng = rng::stream(seed, Stream::Traffic);
    let picks = index::sample(&mut rng, pairs.max(1), template.num_flows);
    let flows = picks
        .into_iter()
        .map(|i| {
            // Pair i enumerates (s, d) with d != s in row-major order.
            let s = i / (nodes - 1);
            let mut d = i % (nodes - 1);
            if d >= s {
                d += 1;
            }
            let start = if template.stagger > 0.0 {
                rng.gen_range(0.0..=template.stagger)
            } else {
                0.0
            };
            CbrFlow {
                source: NodeId(s as u32),
                destination: NodeId(d as u32),
                rate: template.rate,
                packet_size: template.packet_size,
                start_at: SimTime::from_secs(start),
                stop_at,
            }
        })
        .collect();
    Ok(flows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    fn flow(rate: f64, start: f64, stop: f64) -> CbrFlow {
        CbrFlow {
            source: NodeId(0),
            destination: NodeId(1),
            rate,
            packet_size: 64,
            start_at: SimTime::from_secs(start),
            stop_at: SimTime::from_secs(stop),
        }
    }

    #[test]
    fn two_per_second_for_ten_seconds() {
        let f = flow(2.0, 0.0, 10.0);
        assert_eq!(f.packets_before(SimTime::MAX), 20);
        assert_eq!(f.emission(1), Some(SimTime::from_secs(0.5)));
        assert_eq!(f.emission(19), Some(SimTime::from_secs(9.5)));
        assert_eq!(f.emission(20), None);
    }

    #[test]
    fn offered_load_at_32_pps_of_64_bytes() {
        assert_eq!(flow(32.0, 0.0, 1.0).offered_load(), 16_384.0);
    }

    #[test]
    fn empty_window_emits_nothing() {
        assert_eq!(flow(4.0, 3.0, 3.0).packets_before(SimTime::MAX), 0);
    }

    fn template(num_flows: usize) -> FlowTemplate {
        FlowTemplate {
            num_flows,
            ..FlowTemplate::default()
        }
    }

    #[test]
    fn two_nodes_single_flow() {
        let flows = build_flows(2, &template(1), SimTime::from_secs(10.0), 3).unwrap();
        assert_eq!(flows.len(), 1);
        let pair = (flows[0].source.0, flows[0].destination.0);
        assert!(pair == (0, 1) || pair == (1, 0));
    }

    #[test]
    fn same_seed_same_pairs() {
        let a = build_flows(10, &template(20), SimTime::from_secs(10.0), 7).unwrap();
        let b = build_flows(10, &template(20), SimTime::from_secs(10.0), 7).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn zero_flows_is_empty() {
        assert!(build_flows(10, &template(0), SimTime::from_secs(10.0), 1).unwrap().is_empty());
        assert!(build_flows(1, &template(0), SimTime::from_secs(10.0), 1).unwrap().is_empty());
    }

    #[test]
    fn too_many_flows_rejected() {
        assert!(build_flows(3, &template(7), SimTime::from_secs(10.0), 1).is_err());
        assert_eq!(build_flows(3, &template(6), SimTime::from_secs(10.0), 1).unwrap().len(), 6);
    }

    proptest::proptest! {
        #[test]
        fn pairs_are_distinct_and_never_self(nodes in 2usize..12, seed in 0u64..1000, frac in 0.0f64..=1.0) {
            let k = ((nodes * (nodes - 1)) as f64 * frac) as usize;
            let flows = build_flows(nodes, &template(k), SimTime::from_secs(10.0), seed).unwrap();
            let pairs: BTreeSet<_> = flows.iter().map(|f| (f.source, f.destination)).collect();
            proptest::prop_assert_eq!(pairs.len(), k);
            for f in &flows {
                proptest::prop_assert!(f.source != f.destination);
                proptest::prop_assert!(f.destination.index() < nodes);
                proptest::prop_assert!(f.start_at <= SimTime::from_secs(10.0));
            }
        }
    }
}
