//! Seeded event streams for the task regimes.
//!
//! IR nodes come from a pool of training nodes held out of the t0 graph; FR
//! nodes are drawn uniformly from whatever is in the training set at that
//! timestamp. The two draws use separate streams, so switching one kind off
//! leaves the other unchanged.

use std::collections::BTreeSet;

use rand::seq::{IteratorRandom, SliceRandom};

use super::config::{Regime, RunConfig};
use crate::error::{Error, Result};
use crate::graph::{GraphStore, NewNode, NodeId, TimelineEvent};
use crate::rng;
use crate::split::SplitAssignment;

/// Starting graph and split plus the events to replay against them.
#[derive(Clone, Debug)]
pub struct Schedule {
    pub graph: GraphStore,
    pub split: SplitAssignment,
    pub events: Vec<TimelineEvent>,
}

/// Checks that an explicit event stream only uses request kinds the regime allows.
pub fn check_regime(regime: Regime, events: &[TimelineEvent]) -> Result<()> {
    for ev in events {
        if !ev.forget.is_empty() && !regime.allows_fr() {
            return Err(Error::Config(format!("{regime:?} regime does not accept FR events (t={})", ev.t)));
        }
        if !ev.add.is_empty() && !regime.allows_ir() {
            return Err(Error::Config(format!("{regime:?} regime does not accept IR events (t={})", ev.t)));
        }
    }
    Ok(())
}

fn held_back(cfg: &RunConfig, split: &SplitAssignment, graph: &GraphStore) -> Result<Vec<NodeId>> {
    let mut rng = rng::stream(cfg.event_seed, "ir-pool");
    let mut pool: Vec<NodeId> = match cfg.regime {
        Regime::DataIncremental | Regime::Memory => {
            let want = cfg.ir_per_step * cfg.timestamps;
            if want >= split.train.len() {
                return Err(Error::Config(format!(
                    "IR pool of {want} nodes leaves no training nodes at t0 ({} available)",
                    split.train.len()
                )));
            }
            split.train.iter().copied().choose_multiple(&mut rng, want)
        }
        Regime::ClassIncremental => split
            .train
            .iter()
            .copied()
            .filter(|&v| graph.label(v).is_some_and(|y| cfg.withheld.contains(&y)))
            .collect(),
        Regime::Regular | Regime::Unlearning => Vec::new(),
    };
    pool.sort_unstable();
    pool.shuffle(&mut rng);
    Ok(pool)
}

/// Builds the t0 graph, split and generated events for a regime.
pub fn generate(cfg: &RunConfig, graph: &GraphStore, split: &SplitAssignment) -> Result<Schedule> {
    let pool = held_back(cfg, split, graph)?;
    if cfg.regime == Regime::ClassIncremental && pool.is_empty() {
        return Err(Error::Config(format!("no training nodes carry withheld classes {:?}", cfg.withheld)));
    }
    let pool_set: BTreeSet<NodeId> = pool.iter().copied().collect();
    let keep: BTreeSet<NodeId> = graph.node_ids().filter(|v| !pool_set.contains(v)).collect();
    let t0 = graph.induced(&keep);
    let mut t0_split = split.clone();
    for v in &pool {
        t0_split.remove(*v);
    }

    let steps = if cfg.regime == Regime::Regular { 0 } else { cfg.timestamps };
    let per_step = if cfg.regime == Regime::ClassIncremental {
        pool.len().div_ceil(steps.max(1))
    } else {
        cfg.ir_per_step
    };
    let mut chunks = pool.chunks(per_step.max(1));
    let mut fr_rng = rng::stream(cfg.event_seed, "fr");
    let mut train = t0_split.train.clone();
    let mut events = Vec::with_capacity(steps);
    for t in 1..=steps {
        let forget: BTreeSet<NodeId> = if cfg.regime.allows_fr() {
            train.iter().copied().choose_multiple(&mut fr_rng, cfg.fr_per_step).into_iter().collect()
        } else {
            BTreeSet::new()
        };
        for v in &forget {
            train.remove(v);
        }
        let add: Vec<NewNode> = match chunks.next() {
            Some(c) if cfg.regime.allows_ir() => c
                .iter()
                .map(|&v| {
                    let rec = graph.node(v)?;
                    Ok(NewNode {
                        id: v,
                        features: rec.features.clone(),
                        label: rec.label,
                    })
                })
                .collect::<Result<_>>()?,
            _ => Vec::new(),
        };
        train.extend(add.iter().filter(|n| n.label.is_some()).map(|n| n.id));
        events.push(TimelineEvent { t: t as u64, forget, add });
    }
    Ok(Schedule {
        graph: t0,
        split: t0_split,
        events,
    })
}
