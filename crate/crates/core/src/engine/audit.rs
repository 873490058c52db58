//! Unlearning soundness scan over a live state.

use std::collections::BTreeSet;

use serde::Serialize;

use super::EngineState;
use crate::graph::NodeId;

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct AuditReport {
    pub forgotten: usize,
    pub models_scanned: usize,
    pub grains_scanned: usize,
    pub violations: Vec<String>,
}

impl AuditReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Looks for any trace of a forgotten node: in trained-on sets, stored grain
/// neighbor lists, the graph, the hierarchy or the split. Also checks that
/// each model's trained-on set matches its grain ledger and that structural
/// invariants hold.
pub fn audit(state: &EngineState) -> AuditReport {
    let mut forgotten: BTreeSet<NodeId> = state.forgotten.clone();
    for e in &state.event_log {
        forgotten.extend(&e.fr);
    }
    let mut r = AuditReport {
        forgotten: forgotten.len(),
        ..Default::default()
    };
    for (key, m) in state.ensemble.models() {
        r.models_scanned += 1;
        for v in m.trained_on.intersection(&forgotten) {
            r.violations.push(format!("model {key} was trained on forgotten node {v}"));
        }
        match state.ledger.get(&key) {
            Some(grains) => {
                let ledger_nodes: BTreeSet<NodeId> = grains.keys().copied().collect();
                if ledger_nodes != m.trained_on {
                    r.violations.push(format!("model {key}: trained_on differs from its grain ledger"));
                }
            }
            None => r.violations.push(format!("model {key} has no grain ledger")),
        }
    }
    for (key, grains) in &state.ledger {
        if state.ensemble.get(*key).is_none() {
            r.violations.push(format!("grain ledger kept for missing model {key}"));
        }
        for (u, nbrs) in grains {
            r.grains_scanned += 1;
            if forgotten.contains(u) {
                r.violations.push(format!("model {key} stores a grain of forgotten node {u}"));
            }
            for v in nbrs.iter().filter(|v| forgotten.contains(v)) {
                r.violations.push(format!("model {key}: grain of {u} references forgotten node {v}"));
            }
        }
    }
    for &v in &forgotten {
        if state.graph.contains(v) {
            r.violations.push(format!("forgotten node {v} is still in the graph"));
        }
        if state.hierarchy.contains(v) {
            r.violations.push(format!("forgotten node {v} is still in the hierarchy"));
        }
        if state.split.train.contains(&v) || state.split.valid.contains(&v) || state.split.test.contains(&v) {
            r.violations.push(format!("forgotten node {v} is still in the split"));
        }
        if state.embeddings.get(v).is_some() {
            r.violations.push(format!("forgotten node {v} still has an embedding"));
        }
    }
    if state.hierarchy.node_count() != state.graph.len() {
        r.violations.push(format!(
            "hierarchy covers {} nodes but the graph holds {}",
            state.hierarchy.node_count(),
            state.graph.len()
        ));
    }
    if let Err(e) = state.graph.check_invariants() {
        r.violations.push(e.to_string());
    }
    if let Err(e) = state.hierarchy.check_invariants(&state.embeddings) {
        r.violations.push(e.to_string());
    }
    r
}
