//! Forgetting: guidance over trained-on sets and stored grain neighborhoods,
//! then scratch retraining of exactly the affected models.

use std::collections::BTreeSet;

use serde::Serialize;

use super::{EngineState, ModelKey, Reaware};
use crate::error::{Error, Result};
use crate::graph::NodeId;

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ForgetPlan {
    pub forget_nodes: BTreeSet<NodeId>,
    pub affected_first: BTreeSet<usize>,
    pub affected_second: BTreeSet<(usize, usize)>,
    pub grain_rebuild_nodes: BTreeSet<NodeId>,
}

impl ForgetPlan {
    pub fn is_empty(&self) -> bool {
        self.affected_first.is_empty() && self.affected_second.is_empty()
    }

    pub fn keys(&self) -> Vec<ModelKey> {
        let mut out: Vec<ModelKey> = self.affected_first.iter().map(|&i| ModelKey::First(i)).collect();
        out.extend(self.affected_second.iter().map(|&(i, j)| ModelKey::Second(i, j)));
        out
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ForgetReport {
    pub plan: ForgetPlan,
    pub removed_edges: usize,
    pub retrained: Vec<ModelKey>,
    pub decommissioned: Vec<ModelKey>,
    /// Second-level models trained because the weakest set changed.
    pub new_support: Vec<ModelKey>,
    pub reselected: bool,
}

/// Models whose training data involves any of `forget`: the node was trained
/// on directly, or it sits in the neighbor list of a surviving node's stored
/// grain. Supporters of an affected selected model are included too.
pub fn guidance(state: &EngineState, forget: &BTreeSet<NodeId>) -> Result<ForgetPlan> {
    for &v in forget {
        if !state.graph.contains(v) {
            return Err(Error::UnknownNode(v));
        }
    }
    let mut plan = ForgetPlan {
        forget_nodes: forget.clone(),
        ..Default::default()
    };
    if forget.is_empty() {
        return Ok(plan);
    }
    for (key, m) in state.ensemble.models() {
        let direct = m.trained_on.iter().any(|v| forget.contains(v));
        let mut via_grain = false;
        if let Some(grains) = state.ledger.get(&key) {
            for (u, nbrs) in grains {
                if !forget.contains(u) && nbrs.iter().any(|n| forget.contains(n)) {
                    via_grain = true;
                    plan.grain_rebuild_nodes.insert(*u);
                }
            }
        }
        if direct || via_grain {
            match key {
                ModelKey::First(i) => plan.affected_first.insert(i),
                ModelKey::Second(i, j) => plan.affected_second.insert((i, j)),
            };
        }
    }
    for &i in &plan.affected_first {
        if state.ensemble.tau_idx.contains(&i) {
            for j in 0..state.config.l {
                if state.ensemble.second.contains_key(&(i, j)) {
                    plan.affected_second.insert((i, j));
                }
            }
        }
    }
    Ok(plan)
}

impl EngineState {
    /// Removes `forget` from every structure and retrains the affected models
    /// from their original seeds. Untouched models keep their exact bytes.
    pub fn forget(&mut self, forget: &BTreeSet<NodeId>) -> Result<ForgetReport> {
        let plan = guidance(self, forget)?;
        let mut report = ForgetReport::default();
        for &v in forget {
            report.removed_edges += self.graph.remove_node(v)?.len();
            self.hierarchy.remove_node(v, &self.embeddings)?;
            self.embeddings.remove(v);
            self.split.remove(v);
            for grains in self.ledger.values_mut() {
                grains.remove(&v);
            }
            self.forgotten.insert(v);
        }
        if !plan.grain_rebuild_nodes.is_empty() {
            log::info!(
                "rebuilding grains of {} surviving nodes that referenced forgotten nodes",
                plan.grain_rebuild_nodes.len()
            );
        }
        let keys = plan.keys();
        let results = self.train_models(&keys)?;
        report.retrained = results.iter().filter(|(_, r)| r.is_some()).map(|(k, _)| *k).collect();
        report.decommissioned = self.install(results);
        // a decommissioned first-level model takes its supporters with it
        for key in report.decommissioned.clone() {
            if let ModelKey::First(i) = key {
                for j in 0..self.config.l {
                    let sk = ModelKey::Second(i, j);
                    if self.ensemble.take(sk).is_some() {
                        self.ledger.remove(&sk);
                        report.decommissioned.push(sk);
                    }
                }
            }
        }
        let first_changed = report
            .retrained
            .iter()
            .chain(&report.decommissioned)
            .any(|k| matches!(k, ModelKey::First(_)));
        report.reselected = match self.config.reaware {
            Reaware::Always => true,
            Reaware::OnRetrain => first_changed,
            Reaware::Never => false,
        };
        if report.reselected {
            report.new_support = self.reselect()?;
        }
        report.plan = plan;
        Ok(report)
    }
}
