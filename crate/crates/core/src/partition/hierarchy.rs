//! Two-level shard tree with maintained centroids.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{GraphStore, NodeId};
use crate::partition::bekm::{centroid, partition_bekm, sq_dist};
use crate::partition::blpa::partition_blpa;
use crate::partition::embed::EmbeddingIndex;
use crate::rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Blpa,
    Bekm,
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "blpa" => Ok(Method::Blpa),
            "bekm" => Ok(Method::Bekm),
            _ => Err(Error::Config(format!("unknown partition method {s:?}"))),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Shard {
    pub members: BTreeSet<NodeId>,
    /// Absent while the shard is empty.
    pub centroid: Option<Vec<f64>>,
}

impl Shard {
    fn refresh(&mut self, emb: &EmbeddingIndex) -> Result<()> {
        self.centroid = centroid(&self.members, emb)?;
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PartitionParams {
    pub method: Method,
    pub k: usize,
    pub l: usize,
    pub delta1: Option<usize>,
    pub delta2: Option<usize>,
    pub seed: u64,
    pub max_iters: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartitionHierarchy {
    pub method: Method,
    pub k: usize,
    pub l: usize,
    pub delta1: usize,
    pub delta2: usize,
    pub seed: u64,
    pub first: Vec<Shard>,
    pub second: Vec<Vec<Shard>>,
}

/// `ceil(1.2 * nodes / shards)`.
pub fn default_cap(nodes: usize, shards: usize) -> usize {
    (nodes * 6).div_ceil(shards.max(1) * 5).max(1)
}

#[allow(clippy::too_many_arguments)]
fn run_method(
    graph: &GraphStore,
    emb: &EmbeddingIndex,
    method: Method,
    nodes: &BTreeSet<NodeId>,
    k: usize,
    delta: usize,
    seed: u64,
    max_iters: usize,
) -> Result<Vec<BTreeSet<NodeId>>> {
    match method {
        Method::Blpa => partition_blpa(graph, nodes, k, delta, seed, max_iters),
        Method::Bekm => Ok(partition_bekm(emb, nodes, k, delta, seed, max_iters)?.0),
    }
}

fn relabel(err: Error, level: String) -> Error {
    match err {
        Error::Infeasible { msg, .. } => Error::Infeasible { level, msg },
        other => other,
    }
}

/// First level over every node of `graph`, then the same method inside each
/// first-level shard. Centroids are kept for both levels and both methods.
pub fn build_hierarchy(graph: &GraphStore, emb: &EmbeddingIndex, p: &PartitionParams) -> Result<PartitionHierarchy> {
    let nodes: BTreeSet<NodeId> = graph.node_ids().collect();
    build_hierarchy_over(graph, emb, &nodes, p)
}

pub fn build_hierarchy_over(
    graph: &GraphStore,
    emb: &EmbeddingIndex,
    nodes: &BTreeSet<NodeId>,
    p: &PartitionParams,
) -> Result<PartitionHierarchy> {
    if p.l == 0 {
        return Err(Error::Config("l must be at least 1".into()));
    }
    let delta1 = p.delta1.unwrap_or_else(|| default_cap(nodes.len(), p.k));
    let delta2 = p.delta2.unwrap_or_else(|| default_cap(nodes.len(), p.k * p.l));
    let first_sets = run_method(graph, emb, p.method, nodes, p.k, delta1, rng::derive(p.seed, "level1"), p.max_iters)
        .map_err(|e| relabel(e, "level 1".into()))?;

    let mut first = Vec::with_capacity(p.k);
    let mut second = Vec::with_capacity(p.k);
    for (i, members) in first_sets.into_iter().enumerate() {
        let subs = if members.is_empty() {
            vec![BTreeSet::new(); p.l]
        } else if p.l == 1 {
            vec![members.clone()]
        } else {
            let seed = rng::derive(p.seed, &format!("level2/{i}"));
            run_method(graph, emb, p.method, &members, p.l, delta2, seed, p.max_iters)
                .map_err(|e| relabel(e, format!("level 2, shard {i}")))?
        };
        let mut row = Vec::with_capacity(p.l);
        for s in subs {
            let mut shard = Shard { members: s, centroid: None };
            shard.refresh(emb)?;
            row.push(shard);
        }
        let mut shard = Shard { members, centroid: None };
        shard.refresh(emb)?;
        first.push(shard);
        second.push(row);
    }
    Ok(PartitionHierarchy {
        method: p.method,
        k: p.k,
        l: p.l,
        delta1,
        delta2,
        seed: p.seed,
        first,
        second,
    })
}

impl PartitionHierarchy {
    /// `(first-level index, second-level index)` of `v`.
    pub fn locate(&self, v: NodeId) -> Option<(usize, usize)> {
        let i = self.first.iter().position(|s| s.members.contains(&v))?;
        let j = self.second[i].iter().position(|s| s.members.contains(&v))?;
        Some((i, j))
    }

    pub fn contains(&self, v: NodeId) -> bool {
        self.first.iter().any(|s| s.members.contains(&v))
    }

    pub fn shard(&self, i: usize) -> &Shard {
        &self.first[i]
    }

    pub fn sub_shard(&self, i: usize, j: usize) -> &Shard {
        &self.second[i][j]
    }

    /// Removes `v` from both levels and refreshes the two affected centroids.
    pub fn remove_node(&mut self, v: NodeId, emb: &EmbeddingIndex) -> Result<(usize, (usize, usize))> {
        let (i, j) = self.locate(v).ok_or(Error::UnknownNode(v))?;
        self.first[i].members.remove(&v);
        self.second[i][j].members.remove(&v);
        self.first[i].refresh(emb)?;
        self.second[i][j].refresh(emb)?;
        Ok((i, (i, j)))
    }

    /// Places a new node (whose embedding is already in `emb`) in the nearest
    /// first-level shard with residual capacity, then in the nearest second-level
    /// shard of that parent. Empty shards count as infinitely far. The
    /// second-level index is reported only when the parent is in `supported`;
    /// placement happens either way so the second level keeps tiling the first.
    pub fn assign_new_node(
        &mut self,
        v: NodeId,
        emb: &EmbeddingIndex,
        supported: &BTreeSet<usize>,
    ) -> Result<(usize, Option<usize>)> {
        if self.contains(v) {
            return Err(Error::ReusedId(v));
        }
        let b = emb.vector(v)?;
        let i = nearest(&self.first, b, self.delta1).ok_or(Error::Capacity {
            level: 1,
            cap: self.delta1,
        })?;
        let j = nearest(&self.second[i], b, self.delta2).ok_or(Error::Capacity {
            level: 2,
            cap: self.delta2,
        })?;
        self.first[i].members.insert(v);
        self.second[i][j].members.insert(v);
        self.first[i].refresh(emb)?;
        self.second[i][j].refresh(emb)?;
        Ok((i, supported.contains(&i).then_some(j)))
    }

    pub fn check_invariants(&self, emb: &EmbeddingIndex) -> Result<()> {
        let fail = |m: String| Err(Error::Invariant(m));
        if self.first.len() != self.k || self.second.len() != self.k {
            return fail(format!("expected {} first-level shards", self.k));
        }
        let mut seen = BTreeSet::new();
        for (i, s) in self.first.iter().enumerate() {
            if s.len() > self.delta1 {
                return fail(format!("shard {i} holds {} > {}", s.len(), self.delta1));
            }
            for &v in &s.members {
                if !seen.insert(v) {
                    return fail(format!("node {v} in two first-level shards"));
                }
            }
            if self.second[i].len() != self.l {
                return fail(format!("shard {i} has {} sub-shards", self.second[i].len()));
            }
            let mut union = BTreeSet::new();
            for (j, p) in self.second[i].iter().enumerate() {
                if p.len() > self.delta2 {
                    return fail(format!("sub-shard ({i},{j}) holds {} > {}", p.len(), self.delta2));
                }
                for &v in &p.members {
                    if !union.insert(v) {
                        return fail(format!("node {v} in two sub-shards of {i}"));
                    }
                }
            }
            if union != s.members {
                return fail(format!("sub-shards of {i} do not tile it"));
            }
            for shard in std::iter::once(s).chain(&self.second[i]) {
                let fresh = centroid(&shard.members, emb)?;
                let ok = match (&fresh, &shard.centroid) {
                    (None, None) => true,
                    (Some(a), Some(b)) => a.iter().zip(b).all(|(x, y)| (x - y).abs() <= 1e-9),
                    _ => false,
                };
                if !ok {
                    return fail(format!("stale centroid under shard {i}"));
                }
            }
        }
        Ok(())
    }

    pub fn node_count(&self) -> usize {
        self.first.iter().map(Shard::len).sum()
    }
}

fn nearest(shards: &[Shard], b: &[f64], cap: usize) -> Option<usize> {
    let mut best: Option<(f64, usize)> = None;
    for (i, s) in shards.iter().enumerate() {
        if s.len() >= cap {
            continue;
        }
        let d = s.centroid.as_ref().map_or(f64::INFINITY, |m| sq_dist(b, m));
        if best.is_none_or(|(bd, _)| d < bd) {
            best = Some((d, i));
        }
    }
    best.map(|(_, i)| i)
}
