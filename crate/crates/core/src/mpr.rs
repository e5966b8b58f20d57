//! Greedy multipoint-relay selection over a two-hop neighborhood.

use std::collections::{BTreeMap, BTreeSet};

use crate::NodeId;

/// Two-hop node → the one-hop neighbors that reach it.
pub type TwoHop = BTreeMap<NodeId, BTreeSet<NodeId>>;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MprError {
    #[error("two-hop node {0} has no reaching one-hop neighbor")]
    Unreachable(NodeId),
    #[error("two-hop node {two_hop} lists {reacher}, which is not a one-hop neighbor")]
    UnknownReacher { two_hop: NodeId, reacher: NodeId },
}

/// Selects MPRs covering every two-hop node.
///
/// Neighbors that are the sole reacher of some two-hop node are taken first.
/// The rest are added one at a time, each time choosing the neighbor that
/// covers the most still-uncovered two-hop nodes, lower id on ties.
pub fn select_mprs(one_hop: &BTreeSet<NodeId>, two_hop: &TwoHop) -> Result<BTreeSet<NodeId>, MprError> {
    for (&target, reachers) in two_hop {
        if reachers.is_empty() {
            return Err(MprError::Unreachable(target));
        }
        if let Some(&reacher) = reachers.iter().find(|r| !one_hop.contains(r)) {
            return Err(MprError::UnknownReacher { two_hop: target, reacher });
        }
    }

    let mut mprs: BTreeSet<NodeId> = two_hop
        .values()
        .filter(|r| r.len() == 1)
        .flat_map(|r| r.iter().copied())
        .collect();

    // Two-hop nodes by dense index; inverted index from neighbor to the
    // indices it reaches, in ascending neighbor order.
    let mut uncovered: Vec<bool> = two_hop.values().map(|r| r.is_disjoint(&mprs)).collect();
    let mut remaining = uncovered.iter().filter(|&&u| u).count();
    let mut reach: BTreeMap<NodeId, Vec<usize>> = BTreeMap::new();
    for (i, reachers) in two_hop.values().enumerate() {
        for &r in reachers {
            reach.entry(r).or_default().push(i);
        }
    }
    let reach: Vec<(NodeId, Vec<usize>)> = reach.into_iter().filter(|(n, _)| !mprs.contains(n)).collect();
    let mut taken = vec![false; reach.len()];

    while remaining > 0 {
        let mut best: Option<(usize, usize)> = None;
        for (k, (_, targets)) in reach.iter().enumerate() {
            if taken[k] {
                continue;
            }
            let gain = targets.iter().filter(|&&t| uncovered[t]).count();
            // Strict `>` keeps the lowest id among equal gains.
            if gain > 0 && best.is_none_or(|(g, _)| gain > g) {
                best = Some((gain, k));
            }
        }
        let (gain, k) = best.expect("every uncovered node has a reacher");
        for &t in &reach[k].1 {
            uncovered[t] = false;
        }
        remaining -= gain;
        taken[k] = true;
        mprs.insert(reach[k].0);
    }
    Ok(mprs)
}

/// True when every two-hop node is reached by at least one member of `mprs`.
pub fn covers(mprs: &BTreeSet<NodeId>, two_hop: &TwoHop) -> bool {
    two_hop.values().all(|reachers| !reachers.is_disjoint(mprs))
}
