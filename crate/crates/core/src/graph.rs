//! The evolving attributed graph and its timestamped deltas.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Stable node identifier. Ids are never reused once a node is forgotten.
pub type NodeId = u64;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeRecord {
    /// Dense `F x C` matrix, row-major (`features[f * C + c]`).
    pub features: Vec<f64>,
    pub label: Option<usize>,
    /// Sorted, deduplicated, no self-loop.
    pub neighbors: Vec<NodeId>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphStore {
    feature_dim: usize,
    channels: usize,
    nodes: BTreeMap<NodeId, NodeRecord>,
    retired: BTreeSet<NodeId>,
    num_classes: usize,
}

/// A node arriving with an incremental request.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NewNode {
    pub id: NodeId,
    pub features: Vec<f64>,
    pub label: Option<usize>,
}

/// One timestamp's forgetting and incremental requests.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TimelineEvent {
    pub t: u64,
    pub forget: BTreeSet<NodeId>,
    pub add: Vec<NewNode>,
}

impl TimelineEvent {
    pub fn is_empty(&self) -> bool {
        self.forget.is_empty() && self.add.is_empty()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventReport {
    /// Removed undirected edges as `(min, max)` pairs, each reported once.
    pub removed_edges: Vec<(NodeId, NodeId)>,
    pub inserted: Vec<NodeId>,
}

impl GraphStore {
    pub fn new(feature_dim: usize, channels: usize) -> Self {
        Self {
            feature_dim,
            channels,
            nodes: BTreeMap::new(),
            retired: BTreeSet::new(),
            num_classes: 0,
        }
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn contains(&self, id: NodeId) -> bool {
        self.nodes.contains_key(&id)
    }

    pub fn node_ids(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes.keys().copied()
    }

    pub fn node(&self, id: NodeId) -> Result<&NodeRecord> {
        self.nodes.get(&id).ok_or(Error::UnknownNode(id))
    }

    pub fn nodes(&self) -> impl Iterator<Item = (NodeId, &NodeRecord)> + '_ {
        self.nodes.iter().map(|(&id, rec)| (id, rec))
    }

    pub fn neighbors(&self, id: NodeId) -> &[NodeId] {
        self.nodes.get(&id).map_or(&[], |r| r.neighbors.as_slice())
    }

    pub fn label(&self, id: NodeId) -> Option<usize> {
        self.nodes.get(&id).and_then(|r| r.label)
    }

    pub fn features(&self, id: NodeId) -> Result<&[f64]> {
        Ok(&self.node(id)?.features)
    }

    /// Ids that were forgotten and may never reappear.
    pub fn retired(&self) -> &BTreeSet<NodeId> {
        &self.retired
    }

    pub fn edge_count(&self) -> usize {
        self.nodes.values().map(|r| r.neighbors.len()).sum::<usize>() / 2
    }

    /// Undirected edges as sorted `(min, max)` pairs.
    pub fn edges(&self) -> Vec<(NodeId, NodeId)> {
        let mut out = Vec::with_capacity(self.edge_count());
        for (&u, rec) in &self.nodes {
            for &v in &rec.neighbors {
                if u < v {
                    out.push((u, v));
                }
            }
        }
        out
    }

    /// Average of the node's feature matrix over channels (length `F`).
    pub fn channel_mean(&self, id: NodeId) -> Result<Vec<f64>> {
        let x = self.features(id)?;
        Ok(channel_mean(x, self.feature_dim, self.channels))
    }

    pub fn add_node(&mut self, id: NodeId, features: Vec<f64>, label: Option<usize>) -> Result<()> {
        if self.nodes.contains_key(&id) || self.retired.contains(&id) {
            return Err(Error::ReusedId(id));
        }
        self.check_feature_len(features.len())?;
        if let Some(c) = label {
            self.num_classes = self.num_classes.max(c + 1);
        }
        self.nodes.insert(
            id,
            NodeRecord {
                features,
                label,
                neighbors: Vec::new(),
            },
        );
        Ok(())
    }

    pub fn set_label(&mut self, id: NodeId, label: Option<usize>) -> Result<()> {
        let rec = self.nodes.get_mut(&id).ok_or(Error::UnknownNode(id))?;
        rec.label = label;
        if let Some(c) = label {
            self.num_classes = self.num_classes.max(c + 1);
        }
        Ok(())
    }

    /// Marks ids as used by nodes that no longer exist.
    pub fn retire(&mut self, ids: impl IntoIterator<Item = NodeId>) -> Result<()> {
        for id in ids {
            if self.nodes.contains_key(&id) {
                return Err(Error::Invariant(format!("cannot retire live node {id}")));
            }
            self.retired.insert(id);
        }
        Ok(())
    }

    /// Records that class ids below `n` exist even if no current node carries them.
    pub fn reserve_classes(&mut self, n: usize) {
        self.num_classes = self.num_classes.max(n);
    }

    /// Inserts the undirected edge `u - v`. Returns `false` for self-loops and duplicates.
    pub fn add_edge(&mut self, u: NodeId, v: NodeId) -> Result<bool> {
        if !self.contains(u) {
            return Err(Error::UnknownNode(u));
        }
        if !self.contains(v) {
            return Err(Error::UnknownNode(v));
        }
        if u == v {
            return Ok(false);
        }
        let inserted = insert_sorted(&mut self.nodes.get_mut(&u).unwrap().neighbors, v);
        if inserted {
            insert_sorted(&mut self.nodes.get_mut(&v).unwrap().neighbors, u);
        }
        Ok(inserted)
    }

    /// Removes `id` and its incident edges; the id is retired permanently.
    pub fn remove_node(&mut self, id: NodeId) -> Result<Vec<(NodeId, NodeId)>> {
        let rec = self.nodes.remove(&id).ok_or(Error::UnknownNode(id))?;
        let mut removed = Vec::with_capacity(rec.neighbors.len());
        for &u in &rec.neighbors {
            if let Some(n) = self.nodes.get_mut(&u) {
                if let Ok(pos) = n.neighbors.binary_search(&id) {
                    n.neighbors.remove(pos);
                }
            }
            removed.push((id.min(u), id.max(u)));
        }
        self.retired.insert(id);
        Ok(removed)
    }

    /// Applies one timestamp's delta: forgetting first, then insertion of the new
    /// nodes without edges. The event is validated as a whole before any mutation.
    pub fn apply_event(&mut self, event: &TimelineEvent) -> Result<EventReport> {
        self.validate_event(event)?;
        let mut report = EventReport::default();
        let mut edges = BTreeSet::new();
        for &v in &event.forget {
            edges.extend(self.remove_node(v)?);
        }
        report.removed_edges = edges.into_iter().collect();
        for n in &event.add {
            self.add_node(n.id, n.features.clone(), n.label)?;
            report.inserted.push(n.id);
        }
        Ok(report)
    }

    /// Checks an event against the current graph without mutating it.
    pub fn validate_event(&self, event: &TimelineEvent) -> Result<()> {
        for &v in &event.forget {
            if !self.contains(v) {
                return Err(Error::UnknownNode(v));
            }
        }
        let mut seen = BTreeSet::new();
        for n in &event.add {
            if event.forget.contains(&n.id)
                || self.contains(n.id)
                || self.retired.contains(&n.id)
                || !seen.insert(n.id)
            {
                return Err(Error::ReusedId(n.id));
            }
            self.check_feature_len(n.features.len())?;
        }
        Ok(())
    }

    /// The induced subgraph on `keep`. Dropped nodes are not retired.
    pub fn induced(&self, keep: &BTreeSet<NodeId>) -> GraphStore {
        let mut g = GraphStore::new(self.feature_dim, self.channels);
        g.num_classes = self.num_classes;
        g.retired = self.retired.clone();
        for (&id, rec) in &self.nodes {
            if keep.contains(&id) {
                let neighbors = rec
                    .neighbors
                    .iter()
                    .copied()
                    .filter(|u| keep.contains(u))
                    .collect();
                g.nodes.insert(
                    id,
                    NodeRecord {
                        features: rec.features.clone(),
                        label: rec.label,
                        neighbors,
                    },
                );
            }
        }
        g
    }

    pub fn check_invariants(&self) -> Result<()> {
        let width = self.feature_dim * self.channels;
        for (&id, rec) in &self.nodes {
            if rec.features.len() != width {
                return Err(Error::Invariant(format!("node {id} has {} feature entries", rec.features.len())));
            }
            if self.retired.contains(&id) {
                return Err(Error::Invariant(format!("retired id {id} is live")));
            }
            for w in rec.neighbors.windows(2) {
                if w[0] >= w[1] {
                    return Err(Error::Invariant(format!("neighbors of {id} not strictly sorted")));
                }
            }
            for &u in &rec.neighbors {
                if u == id {
                    return Err(Error::Invariant(format!("self-loop on {id}")));
                }
                let back = self
                    .nodes
                    .get(&u)
                    .ok_or_else(|| Error::Invariant(format!("edge {id}-{u} has a dangling endpoint")))?;
                if back.neighbors.binary_search(&id).is_err() {
                    return Err(Error::Invariant(format!("edge {id}-{u} is not symmetric")));
                }
            }
        }
        Ok(())
    }

    fn check_feature_len(&self, len: usize) -> Result<()> {
        if len != self.feature_dim * self.channels {
            return Err(Error::Shape(format!(
                "expected {} feature entries (F={} C={}), got {len}",
                self.feature_dim * self.channels,
                self.feature_dim,
                self.channels
            )));
        }
        Ok(())
    }
}

pub fn channel_mean(x: &[f64], feature_dim: usize, channels: usize) -> Vec<f64> {
    (0..feature_dim)
        .map(|f| {
            let row = &x[f * channels..(f + 1) * channels];
            row.iter().sum::<f64>() / channels as f64
        })
        .collect()
}

fn insert_sorted(list: &mut Vec<NodeId>, v: NodeId) -> bool {
    match list.binary_search(&v) {
        Ok(_) => false,
        Err(pos) => {
            list.insert(pos, v);
            true
        }
    }
}
