//! The timeline engine: bootstrap, forgetting by scratch retraining,
//! ownership-based incremental learning and hierarchical prediction.

mod audit;
mod forget;
mod remember;
mod store;

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ensemble::{aggregate, low_rank, score_models, Aggregation, Decision, Votes};
use crate::error::{Error, Result};
use crate::fgn::{reduce_features, train, Dims, FeatureSelector, Grain, SubModel, TrainOptions};
use crate::graph::{GraphStore, NodeId, TimelineEvent};
use crate::partition::{build_hierarchy, embed_nodes, EmbeddingIndex, Method, PartitionHierarchy, PartitionParams};
use crate::rng;
use crate::split::SplitAssignment;

pub use audit::{audit, AuditReport};
pub use forget::{guidance, ForgetPlan, ForgetReport};
pub use remember::{select_neighbors, Placement, RememberReport};
pub use store::{load_state, save_state, STATE_VERSION};

/// When the weakest-model selection is recomputed after bootstrap.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reaware {
    Always,
    #[default]
    OnRetrain,
    Never,
}

impl std::str::FromStr for Reaware {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "always" => Ok(Reaware::Always),
            "on_retrain" => Ok(Reaware::OnRetrain),
            "never" => Ok(Reaware::Never),
            _ => Err(Error::Config(format!("unknown reaware policy {s:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EngineConfig {
    pub method: Method,
    pub k: usize,
    pub l: usize,
    pub delta1: Option<usize>,
    pub delta2: Option<usize>,
    pub tau: usize,
    pub mu: usize,
    pub lambda: f64,
    pub hidden: usize,
    pub lr: f64,
    /// Step size of the single SGD step taken on an incremental request.
    #[serde(default = "default_ir_lr")]
    pub ir_lr: f64,
    pub epochs: usize,
    pub feat_cap: usize,
    pub embed_dim: usize,
    pub max_iters: usize,
    pub partition_seed: u64,
    pub model_seed: u64,
    pub aggregation: Aggregation,
    pub reaware: Reaware,
    pub freeze_attention: bool,
}

fn default_ir_lr() -> f64 {
    0.05
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            method: Method::Blpa,
            k: 5,
            l: 2,
            delta1: None,
            delta2: None,
            tau: 2,
            mu: 3,
            lambda: 0.5,
            hidden: 16,
            lr: 0.05,
            ir_lr: default_ir_lr(),
            epochs: 200,
            feat_cap: 64,
            embed_dim: 32,
            max_iters: 100,
            partition_seed: 1,
            model_seed: 2,
            aggregation: Aggregation::Mean,
            reaware: Reaware::OnRetrain,
            freeze_attention: false,
        }
    }
}

impl EngineConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.k == 0 || self.l == 0 {
            return bad("k and l must be at least 1".into());
        }
        if self.tau > self.k {
            return bad(format!("tau={} exceeds k={}", self.tau, self.k));
        }
        if self.mu == 0 {
            return bad("mu must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return bad(format!("lambda must lie in [0, 1], got {}", self.lambda));
        }
        if self.hidden == 0 {
            return bad("hidden must be at least 1".into());
        }
        for (name, lr) in [("lr", self.lr), ("ir_lr", self.ir_lr)] {
            if !(lr >= 0.0 && lr.is_finite()) {
                return bad(format!("{name} must be finite and >= 0, got {lr}"));
            }
        }
        if self.feat_cap < 2 || self.embed_dim < 2 {
            return bad("feat_cap and embed_dim must be at least 2".into());
        }
        if self.delta1 == Some(0) || self.delta2 == Some(0) {
            return bad("capacity caps must be positive".into());
        }
        Ok(())
    }

    pub fn partition_params(&self) -> PartitionParams {
        PartitionParams {
            method: self.method,
            k: self.k,
            l: self.l,
            delta1: self.delta1,
            delta2: self.delta2,
            seed: self.partition_seed,
            max_iters: self.max_iters,
        }
    }

    pub fn train_options(&self) -> TrainOptions {
        TrainOptions {
            lr: self.lr,
            epochs: self.epochs,
            freeze_attention: self.freeze_attention,
        }
    }

    pub fn model_seed(&self, key: ModelKey) -> u64 {
        rng::derive(self.model_seed, &key.to_string())
    }
}

/// Identifies a sub-model: `1_i` at the first level, `2_i_j` at the second
/// (indices 0-based).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ModelKey {
    First(usize),
    Second(usize, usize),
}

impl ModelKey {
    pub fn parent(&self) -> usize {
        match *self {
            ModelKey::First(i) | ModelKey::Second(i, _) => i,
        }
    }

    pub fn level(&self) -> u8 {
        match self {
            ModelKey::First(_) => 1,
            ModelKey::Second(..) => 2,
        }
    }
}

impl std::fmt::Display for ModelKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ModelKey::First(i) => write!(f, "1_{i}"),
            ModelKey::Second(i, j) => write!(f, "2_{i}_{j}"),
        }
    }
}

impl std::str::FromStr for ModelKey {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Data(format!("bad model key {s:?}"));
        let parts: Vec<usize> = s
            .split('_')
            .map(|p| p.parse::<usize>().map_err(|_| bad()))
            .collect::<Result<_>>()?;
        match parts.as_slice() {
            [1, i] => Ok(ModelKey::First(*i)),
            [2, i, j] => Ok(ModelKey::Second(*i, *j)),
            _ => Err(bad()),
        }
    }
}

impl Serialize for ModelKey {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ModelKey {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Live sub-models and the progress-aware selection.
#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleState {
    pub aggregation: Aggregation,
    pub lambda: f64,
    pub tau: usize,
    pub tau_idx: BTreeSet<usize>,
    pub scores: BTreeMap<usize, f64>,
    pub first: BTreeMap<usize, SubModel>,
    pub second: BTreeMap<(usize, usize), SubModel>,
}

impl EnsembleState {
    pub fn get(&self, key: ModelKey) -> Option<&SubModel> {
        match key {
            ModelKey::First(i) => self.first.get(&i),
            ModelKey::Second(i, j) => self.second.get(&(i, j)),
        }
    }

    pub fn keys(&self) -> Vec<ModelKey> {
        let mut out: Vec<ModelKey> = self.first.keys().map(|&i| ModelKey::First(i)).collect();
        out.extend(self.second.keys().map(|&(i, j)| ModelKey::Second(i, j)));
        out
    }

    pub fn models(&self) -> impl Iterator<Item = (ModelKey, &SubModel)> {
        self.first
            .iter()
            .map(|(&i, m)| (ModelKey::First(i), m))
            .chain(self.second.iter().map(|(&(i, j), m)| (ModelKey::Second(i, j), m)))
    }

    fn put(&mut self, key: ModelKey, m: SubModel) {
        match key {
            ModelKey::First(i) => self.first.insert(i, m),
            ModelKey::Second(i, j) => self.second.insert((i, j), m),
        };
    }

    fn take(&mut self, key: ModelKey) -> Option<SubModel> {
        match key {
            ModelKey::First(i) => self.first.remove(&i),
            ModelKey::Second(i, j) => self.second.remove(&(i, j)),
        }
    }
}

/// One applied timestamp, as persisted in `event_log.jsonl`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub t: u64,
    pub fr: Vec<NodeId>,
    pub ir: Vec<NodeId>,
    pub retrained: Vec<ModelKey>,
    pub decommissioned: Vec<ModelKey>,
    /// Surviving nodes whose stored grains referenced a forgotten node.
    #[serde(default)]
    pub rebuilt_grains: Vec<NodeId>,
    /// Capacity relaxations applied during ownership assignment.
    #[serde(default)]
    pub relaxed: Vec<String>,
    #[serde(default)]
    pub tau_idx: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EngineState {
    pub config: EngineConfig,
    pub graph: GraphStore,
    pub split: SplitAssignment,
    pub selector: FeatureSelector,
    pub embeddings: EmbeddingIndex,
    pub hierarchy: PartitionHierarchy,
    pub ensemble: EnsembleState,
    /// Classes known to the models' output heads.
    pub classes: usize,
    /// Per model: node -> neighbor ids of the grain it was trained on.
    pub ledger: BTreeMap<ModelKey, BTreeMap<NodeId, Vec<NodeId>>>,
    pub timestamp: u64,
    pub event_log: Vec<LogEntry>,
    pub forgotten: BTreeSet<NodeId>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct BootstrapReport {
    pub trained: Vec<ModelKey>,
    /// Shards without training nodes.
    pub skipped: Vec<ModelKey>,
    pub scores: BTreeMap<usize, f64>,
    pub tau_idx: BTreeSet<usize>,
}

type Trained = (ModelKey, Option<(SubModel, BTreeMap<NodeId, Vec<NodeId>>)>);

impl EngineState {
    pub fn dims(&self) -> Dims {
        Dims {
            feat: self.selector.dim(),
            channels: self.graph.channels(),
            hidden: self.config.hidden,
            classes: self.classes,
        }
    }

    /// Members of the shard a model is responsible for.
    pub fn scope(&self, key: ModelKey) -> &BTreeSet<NodeId> {
        match key {
            ModelKey::First(i) => &self.hierarchy.first[i].members,
            ModelKey::Second(i, j) => &self.hierarchy.second[i][j].members,
        }
    }

    /// Graph neighbors of `v` restricted to `scope`.
    pub fn scoped_neighbors(&self, v: NodeId, scope: &BTreeSet<NodeId>) -> Vec<NodeId> {
        self.graph
            .neighbors(v)
            .iter()
            .copied()
            .filter(|u| scope.contains(u))
            .collect()
    }

    pub fn grain(&self, v: NodeId, scope: &BTreeSet<NodeId>) -> Result<Grain> {
        Grain::from_graph(&self.graph, &self.selector, v, &self.scoped_neighbors(v, scope))
    }

    /// Training grains of a model: labeled training nodes of its shard.
    pub fn training_grains(&self, key: ModelKey) -> Result<Vec<Grain>> {
        let scope = self.scope(key);
        scope
            .iter()
            .filter(|v| self.split.train.contains(v) && self.graph.label(**v).is_some())
            .map(|&v| self.grain(v, scope))
            .collect()
    }

    /// A node's grain for models at `level`: neighbors within its own shard there.
    pub fn eval_grain(&self, v: NodeId, level: u8) -> Result<Grain> {
        let (i, j) = self.hierarchy.locate(v).ok_or(Error::UnknownNode(v))?;
        let scope = if level == 1 {
            &self.hierarchy.first[i].members
        } else {
            &self.hierarchy.second[i][j].members
        };
        self.grain(v, scope)
    }

    fn fresh_model(&self, key: ModelKey) -> SubModel {
        SubModel::new(self.dims(), self.config.model_seed(key))
    }

    /// Trains (from scratch) every listed model on its current shard.
    fn train_models(&self, keys: &[ModelKey]) -> Result<Vec<Trained>> {
        let opts = self.config.train_options();
        keys.par_iter()
            .map(|&key| {
                let grains = self.training_grains(key)?;
                if grains.is_empty() {
                    return Ok((key, None));
                }
                let mut m = self.fresh_model(key);
                train(&mut m, &grains, &[], &opts)?;
                let ledger = grains.iter().map(|g| (g.node, g.neighbor_ids.clone())).collect();
                Ok((key, Some((m, ledger))))
            })
            .collect()
    }

    /// Installs training results; returns the keys left without a model.
    fn install(&mut self, results: Vec<Trained>) -> Vec<ModelKey> {
        let mut empty = Vec::new();
        for (key, r) in results {
            match r {
                Some((m, ledger)) => {
                    self.ensemble.put(key, m);
                    self.ledger.insert(key, ledger);
                }
                None => {
                    log::warn!("model {key} has no training nodes in its shard; excluded from aggregation");
                    self.ensemble.take(key);
                    self.ledger.remove(&key);
                    empty.push(key);
                }
            }
        }
        empty
    }

    /// Validation nodes whose class the heads already know.
    fn validation_grains(&self) -> Result<Vec<Grain>> {
        self.split
            .valid
            .iter()
            .filter(|&&v| self.graph.label(v).is_some_and(|y| y < self.classes))
            .map(|&v| self.eval_grain(v, 1))
            .collect()
    }

    /// Rescores first-level models and swaps second-level support to the new
    /// weakest set. Supporters of indices that stay selected are kept.
    pub fn reselect(&mut self) -> Result<Vec<ModelKey>> {
        let valid = self.validation_grains()?;
        self.ensemble.scores = if self.ensemble.first.is_empty() || self.ensemble.tau == 0 && valid.is_empty() {
            BTreeMap::new()
        } else {
            score_models(self.ensemble.first.iter().map(|(&i, m)| (i, m)), &valid)?
        };
        let new_idx = low_rank(&self.ensemble.scores, self.ensemble.tau);
        let old_idx = std::mem::replace(&mut self.ensemble.tau_idx, new_idx.clone());
        for &i in old_idx.difference(&new_idx) {
            for j in 0..self.config.l {
                self.ensemble.take(ModelKey::Second(i, j));
                self.ledger.remove(&ModelKey::Second(i, j));
            }
        }
        let keys: Vec<ModelKey> = new_idx
            .difference(&old_idx)
            .flat_map(|&i| (0..self.config.l).map(move |j| ModelKey::Second(i, j)))
            .collect();
        let results = self.train_models(&keys)?;
        let trained: Vec<ModelKey> = results.iter().filter(|(_, r)| r.is_some()).map(|(k, _)| *k).collect();
        self.install(results);
        for &i in new_idx.difference(&old_idx) {
            if !trained.iter().any(|k| k.parent() == i) {
                log::warn!("no second-level shard of {i} has training nodes; support omitted");
            }
        }
        Ok(trained)
    }

    /// Class distribution decisions for `nodes`.
    pub fn predict(&self, nodes: &[NodeId]) -> Result<Vec<Decision>> {
        if self.ensemble.first.is_empty() {
            return Err(Error::Empty("no live first-level models".into()));
        }
        nodes
            .par_iter()
            .map(|&v| {
                let g1 = self.eval_grain(v, 1)?;
                let g2 = if self.ensemble.second.is_empty() {
                    None
                } else {
                    Some(self.eval_grain(v, 2)?)
                };
                let mut votes = Vec::with_capacity(self.ensemble.first.len());
                for (&i, m) in &self.ensemble.first {
                    let alpha = m.predict_proba(&g1)?;
                    let mut support = Vec::new();
                    if self.ensemble.tau_idx.contains(&i) {
                        for j in 0..self.config.l {
                            if let (Some(s), Some(g2)) = (self.ensemble.second.get(&(i, j)), &g2) {
                                support.push(s.predict_proba(g2)?);
                            }
                        }
                    }
                    votes.push(Votes { alpha, support });
                }
                Ok(aggregate(self.ensemble.aggregation, self.ensemble.lambda, self.config.l, &votes))
            })
            .collect()
    }

    /// Checkpoint bytes of every live model.
    pub fn checkpoints(&self) -> BTreeMap<ModelKey, Vec<u8>> {
        self.ensemble
            .models()
            .map(|(k, m)| (k, crate::fgn::checkpoint::to_bytes(m)))
            .collect()
    }

    /// Applies one timestamp: forgetting first, then incremental requests.
    pub fn step(&mut self, event: &TimelineEvent) -> Result<(ForgetReport, RememberReport)> {
        if event.t <= self.timestamp {
            return Err(Error::Data(format!(
                "event t={} does not follow current timestamp {}",
                event.t, self.timestamp
            )));
        }
        self.graph.validate_event(event)?;
        let fr = self.forget(&event.forget)?;
        let mut order = event.add.clone();
        order.sort_by_key(|n| n.id);
        let ir = self.remember(&order)?;
        self.timestamp = event.t;
        self.event_log.push(LogEntry {
            t: event.t,
            fr: event.forget.iter().copied().collect(),
            ir: order.iter().map(|n| n.id).collect(),
            retrained: fr.retrained.clone(),
            decommissioned: fr.decommissioned.clone(),
            rebuilt_grains: fr.plan.grain_rebuild_nodes.iter().copied().collect(),
            relaxed: ir.relaxed.clone(),
            tau_idx: self.ensemble.tau_idx.iter().copied().collect(),
        });
        Ok((fr, ir))
    }
}

/// Partitions the graph, trains every first-level model, selects the weakest
/// and trains their second-level supporters.
pub fn bootstrap(graph: GraphStore, split: SplitAssignment, config: EngineConfig) -> Result<(EngineState, BootstrapReport)> {
    config.validate()?;
    graph.check_invariants()?;
    split.check(&graph)?;
    if split.train.is_empty() {
        return Err(Error::Empty("training set".into()));
    }
    let selector = reduce_features(&graph, &split.train, config.feat_cap)?;
    let embeddings = embed_nodes(&graph, config.embed_dim, rng::derive(config.partition_seed, "embed"))?;
    let hierarchy = build_hierarchy(&graph, &embeddings, &config.partition_params())?;
    let classes = split
        .train
        .iter()
        .filter_map(|&v| graph.label(v))
        .max()
        .map_or(1, |c| c + 1);
    let mut state = EngineState {
        ensemble: EnsembleState {
            aggregation: config.aggregation,
            lambda: config.lambda,
            tau: config.tau,
            tau_idx: BTreeSet::new(),
            scores: BTreeMap::new(),
            first: BTreeMap::new(),
            second: BTreeMap::new(),
        },
        config,
        graph,
        split,
        selector,
        embeddings,
        hierarchy,
        classes,
        ledger: BTreeMap::new(),
        timestamp: 0,
        event_log: Vec::new(),
        forgotten: BTreeSet::new(),
    };
    let keys: Vec<ModelKey> = (0..state.config.k).map(ModelKey::First).collect();
    let results = state.train_models(&keys)?;
    let mut report = BootstrapReport {
        skipped: state.install(results),
        ..Default::default()
    };
    let support = state.reselect()?;
    report.skipped.extend(
        state
            .ensemble
            .tau_idx
            .iter()
            .flat_map(|&i| (0..state.config.l).map(move |j| ModelKey::Second(i, j)))
            .filter(|k| state.ensemble.get(*k).is_none()),
    );
    report.trained = state.ensemble.keys();
    debug_assert!(support.iter().all(|k| report.trained.contains(k)));
    report.scores = state.ensemble.scores.clone();
    report.tau_idx = state.ensemble.tau_idx.clone();
    Ok((state, report))
}
