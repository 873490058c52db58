//! Run configuration: defaults, `key = value` files and single-key overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::engine::EngineConfig;
use crate::error::{Error, Result};
use crate::sbm::SbmSpec;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    #[default]
    Regular,
    Memory,
    Unlearning,
    DataIncremental,
    ClassIncremental,
}

impl std::str::FromStr for Regime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.replace('-', "_").as_str() {
            "regular" => Ok(Regime::Regular),
            "memory" => Ok(Regime::Memory),
            "unlearning" => Ok(Regime::Unlearning),
            "data_incremental" => Ok(Regime::DataIncremental),
            "class_incremental" => Ok(Regime::ClassIncremental),
            _ => Err(Error::Config(format!("unknown regime {s:?}"))),
        }
    }
}

impl Regime {
    pub fn allows_fr(self) -> bool {
        matches!(self, Regime::Memory | Regime::Unlearning)
    }

    pub fn allows_ir(self) -> bool {
        matches!(self, Regime::Memory | Regime::DataIncremental | Regime::ClassIncremental)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetSource {
    Sbm(SbmSpec),
    Files { nodes: PathBuf, edges: PathBuf },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub dataset: DatasetSource,
    pub engine: EngineConfig,
    pub regime: Regime,
    pub train_frac: f64,
    pub valid_frac: f64,
    pub split_seed: u64,
    pub event_seed: u64,
    pub timestamps: usize,
    pub fr_per_step: usize,
    pub ir_per_step: usize,
    /// Classes held out of t0 in the class-incremental regime.
    pub withheld: Vec<usize>,
    /// Explicit events file; replaces the generators.
    pub events: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
    /// Persist the engine state every this many timestamps (0 = never).
    pub checkpoint_every: usize,
    pub state_dir: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            dataset: DatasetSource::Sbm(SbmSpec::default()),
            engine: EngineConfig::default(),
            regime: Regime::Regular,
            train_frac: 0.8,
            valid_frac: 0.1,
            split_seed: 3,
            event_seed: 4,
            timestamps: 5,
            fr_per_step: 5,
            ir_per_step: 10,
            withheld: vec![],
            events: None,
            out_dir: None,
            checkpoint_every: 0,
            state_dir: None,
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, val: &str) -> Result<T> {
    val.trim()
        .parse()
        .map_err(|_| Error::Config(format!("invalid value {val:?} for {key}")))
}

fn parse_opt(key: &str, val: &str) -> Result<Option<usize>> {
    match val.trim() {
        "" | "auto" | "none" => Ok(None),
        v => parse(key, v).map(Some),
    }
}

fn parse_list(key: &str, val: &str) -> Result<Vec<usize>> {
    val.trim()
        .trim_matches(|c| c == '[' || c == ']')
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse(key, s))
        .collect()
}

impl RunConfig {
    pub fn sbm_mut(&mut self) -> &mut SbmSpec {
        if !matches!(self.dataset, DatasetSource::Sbm(_)) {
            self.dataset = DatasetSource::Sbm(SbmSpec::default());
        }
        match &mut self.dataset {
            DatasetSource::Sbm(s) => s,
            DatasetSource::Files { .. } => unreachable!(),
        }
    }

    /// Sets one configuration key from its textual value.
    pub fn set(&mut self, key: &str, val: &str) -> Result<()> {
        let e = &mut self.engine;
        match key {
            "dataset" => {
                self.dataset = if val == "sbm" {
                    DatasetSource::Sbm(SbmSpec::default())
                } else {
                    let (nodes, edges) = crate::io::dataset_paths(Path::new(val));
                    DatasetSource::Files { nodes, edges }
                }
            }
            "nodes" | "edges" => {
                let (mut nodes, mut edges) = match &self.dataset {
                    DatasetSource::Files { nodes, edges } => (nodes.clone(), edges.clone()),
                    DatasetSource::Sbm(_) => (PathBuf::new(), PathBuf::new()),
                };
                if key == "nodes" {
                    nodes = val.into();
                } else {
                    edges = val.into();
                }
                self.dataset = DatasetSource::Files { nodes, edges };
            }
            "sbm.blocks" => self.sbm_mut().blocks = parse(key, val)?,
            "sbm.nodes_per_block" => self.sbm_mut().nodes_per_block = parse(key, val)?,
            "sbm.p_in" => self.sbm_mut().p_in = parse(key, val)?,
            "sbm.p_out" => self.sbm_mut().p_out = parse(key, val)?,
            "sbm.feature_dim" => self.sbm_mut().feature_dim = parse(key, val)?,
            "sbm.signal" => self.sbm_mut().signal = parse(key, val)?,
            "sbm.seed" => self.sbm_mut().seed = parse(key, val)?,
            "method" => e.method = val.parse()?,
            "k" => e.k = parse(key, val)?,
            "l" => e.l = parse(key, val)?,
            "delta1" => e.delta1 = parse_opt(key, val)?,
            "delta2" => e.delta2 = parse_opt(key, val)?,
            "tau" => e.tau = parse(key, val)?,
            "mu" => e.mu = parse(key, val)?,
            "lambda" => e.lambda = parse(key, val)?,
            "hidden" => e.hidden = parse(key, val)?,
            "lr" => e.lr = parse(key, val)?,
            "ir_lr" => e.ir_lr = parse(key, val)?,
            "epochs" => e.epochs = parse(key, val)?,
            "feat_cap" => e.feat_cap = parse(key, val)?,
            "embed_dim" => e.embed_dim = parse(key, val)?,
            "max_iters" => e.max_iters = parse(key, val)?,
            "partition_seed" => e.partition_seed = parse(key, val)?,
            "model_seed" => e.model_seed = parse(key, val)?,
            "aggregation" => e.aggregation = val.parse()?,
            "reaware" => e.reaware = val.parse()?,
            "freeze_attention" => e.freeze_attention = parse(key, val)?,
            "seed" => {
                let s: u64 = parse(key, val)?;
                e.partition_seed = s;
                e.model_seed = s.wrapping_add(1);
                self.split_seed = s.wrapping_add(2);
                self.event_seed = s.wrapping_add(3);
            }
            "regime" => self.regime = val.parse()?,
            "train_frac" => self.train_frac = parse(key, val)?,
            "valid_frac" => self.valid_frac = parse(key, val)?,
            "split_seed" => self.split_seed = parse(key, val)?,
            "event_seed" => self.event_seed = parse(key, val)?,
            "timestamps" => self.timestamps = parse(key, val)?,
            "fr" => self.fr_per_step = parse(key, val)?,
            "ir" => self.ir_per_step = parse(key, val)?,
            "withheld" => self.withheld = parse_list(key, val)?,
            "events" => self.events = (!val.is_empty()).then(|| val.into()),
            "out" | "out_dir" => self.out_dir = (!val.is_empty()).then(|| val.into()),
            "state" | "state_dir" => self.state_dir = (!val.is_empty()).then(|| val.into()),
            "checkpoint_every" => self.checkpoint_every = parse(key, val)?,
            _ => return Err(Error::Config(format!("unknown configuration key {key:?}"))),
        }
        Ok(())
    }

    /// Applies every entry of a TOML-style `key = value` document. Tables
    /// flatten to dotted keys (`[sbm]` + `p_in` is `sbm.p_in`).
    pub fn apply_str(&mut self, text: &str) -> Result<()> {
        let table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::Config(format!("config file: {}", e.message())))?;
        let mut flat = Vec::new();
        flatten("", &toml::Value::Table(table), &mut flat);
        for (k, v) in flat {
            self.set(&k, &v)?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        self.apply_str(&text)
    }

    /// Applies `key=value`.
    pub fn apply_pair(&mut self, pair: &str) -> Result<()> {
        let (k, v) = pair
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("expected key=value, got {pair:?}")))?;
        self.set(k.trim(), v.trim())
    }

    pub fn validate(&self) -> Result<()> {
        self.engine.validate()?;
        for (name, f) in [("train_frac", self.train_frac), ("valid_frac", self.valid_frac)] {
            if !(f > 0.0 && f < 1.0) {
                return Err(Error::Config(format!("{name} must lie in (0, 1)")));
            }
        }
        if self.regime == Regime::ClassIncremental && self.withheld.is_empty() && self.events.is_none() {
            return Err(Error::Config("class_incremental needs at least one withheld class".into()));
        }
        if self.regime != Regime::Regular && self.timestamps == 0 && self.events.is_none() {
            return Err(Error::Config(format!("{:?} regime needs timestamps >= 1", self.regime)));
        }
        Ok(())
    }
}

fn flatten(prefix: &str, v: &toml::Value, out: &mut Vec<(String, String)>) {
    match v {
        toml::Value::Table(t) => {
            for (k, v) in t {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&key, v, out);
            }
        }
        toml::Value::String(s) => out.push((prefix.into(), s.clone())),
        toml::Value::Array(a) => {
            let items: Vec<String> = a
                .iter()
                .map(|x| match x {
                    toml::Value::String(s) => s.clone(),
                    other => other.to_string(),
                })
                .collect();
            out.push((prefix.into(), items.join(",")));
        }
        other => out.push((prefix.into(), other.to_string())),
    }
}
