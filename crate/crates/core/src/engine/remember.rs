//! Incremental requests: ownership by nearest centroid, top-μ neighbor
//! selection by feature similarity, then one SGD step per owning model.

use std::collections::BTreeSet;

use serde::Serialize;

use super::{EngineState, ModelKey};
use crate::error::{Error, Result};
use crate::fgn::{incremental_step, Grain};
use crate::graph::{NewNode, NodeId};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Placement {
    pub node: NodeId,
    pub first: usize,
    /// Reported only when the owner has second-level support.
    pub second: Option<usize>,
    pub neighbors: Vec<NodeId>,
    /// Models that took a step on this node.
    pub stepped: Vec<ModelKey>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct RememberReport {
    pub placements: Vec<Placement>,
    pub relaxed: Vec<String>,
    pub grown_classes: Option<usize>,
    /// Nodes inserted without a learning step (unlabeled or no live owner).
    pub not_learned: Vec<NodeId>,
}

/// The `mu` candidates most similar to `x` under `1 / (1 + ||x - x_u||)`;
/// ties go to the lower id.
pub fn select_neighbors(x: &[f64], candidates: &[(NodeId, Vec<f64>)], mu: usize) -> Vec<NodeId> {
    let mut scored: Vec<(f64, NodeId)> = candidates
        .iter()
        .map(|(u, xu)| {
            let eta = x.iter().zip(xu).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            (1.0 / (1.0 + eta), *u)
        })
        .collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let mut out: Vec<NodeId> = scored.into_iter().take(mu).map(|(_, u)| u).collect();
    out.sort_unstable();
    out
}

impl EngineState {
    /// Inserts new nodes one at a time in the given order.
    pub fn remember(&mut self, nodes: &[NewNode]) -> Result<RememberReport> {
        let mut report = RememberReport::default();
        for n in nodes {
            let p = self.remember_one(n, &mut report)?;
            report.placements.push(p);
        }
        Ok(report)
    }

    fn assign(&mut self, v: NodeId, report: &mut RememberReport) -> Result<(usize, Option<usize>)> {
        let supported: BTreeSet<usize> = self.ensemble.tau_idx.clone();
        match self.hierarchy.assign_new_node(v, &self.embeddings, &supported) {
            Err(Error::Capacity { level, cap }) => {
                let msg = format!("node {v}: level-{level} cap raised from {cap} to {}", cap + 1);
                log::warn!("{msg}");
                report.relaxed.push(msg);
                if level == 1 {
                    self.hierarchy.delta1 += 1;
                } else {
                    self.hierarchy.delta2 += 1;
                }
                self.hierarchy.assign_new_node(v, &self.embeddings, &supported)
            }
            other => other,
        }
    }

    fn remember_one(&mut self, n: &NewNode, report: &mut RememberReport) -> Result<Placement> {
        let v = n.id;
        self.graph.add_node(v, n.features.clone(), n.label)?;
        if let Some(y) = n.label {
            if y >= self.classes {
                self.classes = y + 1;
                for m in self.ensemble.first.values_mut().chain(self.ensemble.second.values_mut()) {
                    m.grow_classes(y + 1);
                }
                report.grown_classes = Some(y + 1);
            }
        }
        self.embeddings.insert(v, &n.features, self.graph.channels());
        let (i, j) = self.assign(v, report)?;

        let x = self.selector.apply(&n.features);
        let candidates: Vec<(NodeId, Vec<f64>)> = self.hierarchy.first[i]
            .members
            .iter()
            .filter(|&&u| u != v)
            .map(|&u| Ok((u, self.selector.apply(self.graph.features(u)?))))
            .collect::<Result<_>>()?;
        if candidates.is_empty() {
            log::warn!("node {v} owns an otherwise empty shard {i}; its grain falls back to itself");
        }
        let neighbors = select_neighbors(&x, &candidates, self.config.mu);
        for &u in &neighbors {
            self.graph.add_edge(v, u)?;
        }

        let mut placement = Placement {
            node: v,
            first: i,
            second: j,
            neighbors: neighbors.clone(),
            stepped: Vec::new(),
        };
        if n.label.is_none() {
            report.not_learned.push(v);
            return Ok(placement);
        }
        self.split.train.insert(v);
        let mut targets = vec![ModelKey::First(i)];
        if let Some(j) = j {
            targets.push(ModelKey::Second(i, j));
        }
        for key in targets {
            if self.ensemble.get(key).is_none() {
                continue;
            }
            let grain: Grain = self.grain(v, self.scope(key))?;
            let nbrs = grain.neighbor_ids.clone();
            let (lr, freeze) = (self.config.ir_lr, self.config.freeze_attention);
            let m = match key {
                ModelKey::First(i) => self.ensemble.first.get_mut(&i),
                ModelKey::Second(i, j) => self.ensemble.second.get_mut(&(i, j)),
            }
            .expect("checked above");
            incremental_step(m, &grain, lr, freeze)?;
            self.ledger.entry(key).or_default().insert(v, nbrs);
            placement.stepped.push(key);
        }
        if placement.stepped.is_empty() {
            log::warn!("node {v} has no live owning model; inserted without a learning step");
            report.not_learned.push(v);
        }
        Ok(placement)
    }
}
