//! Balanced label-propagation partitioning.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::graph::{GraphStore, NodeId};
use crate::rng;

pub(crate) fn check_feasible(n: usize, k: usize, delta: usize, level: &str) -> Result<()> {
    if k == 0 {
        return Err(Error::Infeasible {
            level: level.into(),
            msg: "shard count must be positive".into(),
        });
    }
    if delta.saturating_mul(k) < n {
        return Err(Error::Infeasible {
            level: level.into(),
            msg: format!("{k} shards of cap {delta} cannot hold {n} nodes"),
        });
    }
    Ok(())
}

/// Nodes ordered by a seeded per-id key. The key of a node does not depend on
/// which other nodes are present.
pub(crate) fn keyed_order(nodes: &BTreeSet<NodeId>, seed: u64) -> Vec<NodeId> {
    let base = rng::derive(seed, "node-key");
    let mut order: Vec<NodeId> = nodes.iter().copied().collect();
    order.sort_by_key(|&v| (rng::mix(base ^ v), v));
    order
}

/// Random balanced start: nodes in seeded key order dealt round-robin.
pub fn initial_assignment(nodes: &BTreeSet<NodeId>, k: usize, seed: u64) -> Vec<BTreeSet<NodeId>> {
    let mut shards = vec![BTreeSet::new(); k];
    for (i, v) in keyed_order(nodes, seed).into_iter().enumerate() {
        shards[i % k].insert(v);
    }
    shards
}

pub fn partition_blpa(
    graph: &GraphStore,
    nodes: &BTreeSet<NodeId>,
    k: usize,
    delta: usize,
    seed: u64,
    max_iters: usize,
) -> Result<Vec<BTreeSet<NodeId>>> {
    check_feasible(nodes.len(), k, delta, "blpa")?;
    let init = initial_assignment(nodes, k, seed);
    blpa_from(graph, init, delta, max_iters)
}

/// Runs the propagation passes from a given assignment. Nodes are visited in
/// ascending id order; a node moves to the shard holding the most of its
/// neighbors (lowest index on ties) only when that count strictly exceeds the
/// count in its current shard and the destination is below `delta`.
pub fn blpa_from(
    graph: &GraphStore,
    init: Vec<BTreeSet<NodeId>>,
    delta: usize,
    max_iters: usize,
) -> Result<Vec<BTreeSet<NodeId>>> {
    let k = init.len();
    let mut owner: BTreeMap<NodeId, usize> = BTreeMap::new();
    let mut sizes = vec![0usize; k];
    for (i, s) in init.iter().enumerate() {
        if s.len() > delta {
            return Err(Error::Infeasible {
                level: "blpa".into(),
                msg: format!("initial shard {i} exceeds cap {delta}"),
            });
        }
        for &v in s {
            if owner.insert(v, i).is_some() {
                return Err(Error::Invariant(format!("node {v} assigned twice")));
            }
        }
        sizes[i] = s.len();
    }
    check_feasible(owner.len(), k, delta, "blpa")?;

    let order: Vec<NodeId> = owner.keys().copied().collect();
    let mut counts = vec![0usize; k];
    for _ in 0..max_iters {
        let mut moved = false;
        for &v in &order {
            counts.iter_mut().for_each(|c| *c = 0);
            for u in graph.neighbors(v) {
                if let Some(&s) = owner.get(u) {
                    counts[s] += 1;
                }
            }
            let src = owner[&v];
            let mut dst = 0;
            for i in 1..k {
                if counts[i] > counts[dst] {
                    dst = i;
                }
            }
            if counts[dst] > counts[src] && sizes[dst] < delta {
                owner.insert(v, dst);
                sizes[src] -= 1;
                sizes[dst] += 1;
                moved = true;
            }
        }
        if !moved {
            break;
        }
    }

    let mut shards = vec![BTreeSet::new(); k];
    for (v, s) in owner {
        shards[s].insert(v);
    }
    Ok(shards)
}
