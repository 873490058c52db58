//! On-disk state directory.
//!
//! ```text
//! manifest.json        config, timestamp, split, feature selection
//! graph/nodes.tsv      current graph (dataset format)
//! graph/edges.tsv
//! hierarchy.json
//! models/<key>.fgn     one checkpoint per live model
//! ensemble.json        aggregation, weights, scores and checkpoint table
//! ledger.json          per-model grain neighbor lists
//! event_log.jsonl
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{EngineConfig, EngineState, EnsembleState, LogEntry, ModelKey};
use crate::ensemble::Aggregation;
use crate::error::{Error, Result};
use crate::fgn::{checkpoint, FeatureSelector};
use crate::graph::NodeId;
use crate::io::{load_dataset, save_dataset};
use crate::partition::{embed_nodes, PartitionHierarchy};
use crate::rng;
use crate::split::SplitAssignment;

pub const STATE_VERSION: u32 = 1;

/// FNV-1a over the little-endian ids.
fn digest(ids: &BTreeSet<NodeId>) -> String {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for id in ids {
        for b in id.to_le_bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
    }
    format!("{h:016x}")
}

#[derive(Serialize, Deserialize)]
struct SplitDigest {
    train: usize,
    valid: usize,
    test: usize,
    train_fnv: String,
    valid_fnv: String,
    test_fnv: String,
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    version: u32,
    config: EngineConfig,
    timestamp: u64,
    classes: usize,
    split_digest: SplitDigest,
    split: SplitAssignment,
    selector: FeatureSelector,
    forgotten: BTreeSet<NodeId>,
    retired: BTreeSet<NodeId>,
}

#[derive(Serialize, Deserialize)]
struct ScoreRow {
    model: ModelKey,
    score: f64,
}

#[derive(Serialize, Deserialize)]
struct CheckpointRow {
    model: ModelKey,
    file: String,
    seed: u64,
}

#[derive(Serialize, Deserialize)]
struct EnsembleManifest {
    aggregation: Aggregation,
    lambda: f64,
    tau: usize,
    tau_idx: BTreeSet<usize>,
    scores: Vec<ScoreRow>,
    checkpoints: Vec<CheckpointRow>,
}

fn write_json<T: Serialize>(path: &Path, v: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    fs::write(path, s)?;
    Ok(())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let s = fs::read_to_string(path).map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&s).map_err(|e| Error::Data(format!("{}: {e}", path.display())))
}

pub fn save_state(state: &EngineState, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir.join("graph"))?;
    fs::create_dir_all(dir.join("models"))?;
    let split = &state.split;
    write_json(
        &dir.join("manifest.json"),
        &Manifest {
            version: STATE_VERSION,
            config: state.config.clone(),
            timestamp: state.timestamp,
            classes: state.classes,
            split_digest: SplitDigest {
                train: split.train.len(),
                valid: split.valid.len(),
                test: split.test.len(),
                train_fnv: digest(&split.train),
                valid_fnv: digest(&split.valid),
                test_fnv: digest(&split.test),
            },
            split: split.clone(),
            selector: state.selector.clone(),
            forgotten: state.forgotten.clone(),
            retired: state.graph.retired().clone(),
        },
    )?;
    save_dataset(&state.graph, &dir.join("graph/nodes.tsv"), &dir.join("graph/edges.tsv"))?;
    write_json(&dir.join("hierarchy.json"), &state.hierarchy)?;

    let mut live = BTreeSet::new();
    let mut rows = Vec::new();
    for (key, m) in state.ensemble.models() {
        let file = format!("models/{key}.fgn");
        let path = dir.join(&file);
        let bytes = checkpoint::to_bytes(m);
        // leave untouched files alone so their mtimes show what changed
        if fs::read(&path).ok().as_deref() != Some(bytes.as_slice()) {
            fs::write(&path, &bytes)?;
        }
        live.insert(format!("{key}.fgn"));
        rows.push(CheckpointRow { model: key, file, seed: m.seed });
    }
    for entry in fs::read_dir(dir.join("models"))? {
        let entry = entry?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if name.ends_with(".fgn") && !live.contains(&name) {
            fs::remove_file(entry.path())?;
        }
    }
    let ens = &state.ensemble;
    write_json(
        &dir.join("ensemble.json"),
        &EnsembleManifest {
            aggregation: ens.aggregation,
            lambda: ens.lambda,
            tau: ens.tau,
            tau_idx: ens.tau_idx.clone(),
            scores: ens
                .scores
                .iter()
                .map(|(&i, &score)| ScoreRow {
                    model: ModelKey::First(i),
                    score,
                })
                .collect(),
            checkpoints: rows,
        },
    )?;
    write_json(&dir.join("ledger.json"), &state.ledger)?;
    let mut log = fs::File::create(dir.join("event_log.jsonl"))?;
    for e in &state.event_log {
        writeln!(log, "{}", serde_json::to_string(e)?)?;
    }
    Ok(())
}

pub fn load_state(dir: &Path) -> Result<EngineState> {
    let m: Manifest = read_json(&dir.join("manifest.json"))?;
    if m.version != STATE_VERSION {
        return Err(Error::Data(format!("state version {} is not supported", m.version)));
    }
    m.config.validate()?;
    let (mut graph, _) = load_dataset(&dir.join("graph/nodes.tsv"), &dir.join("graph/edges.tsv"))?;
    graph.retire(m.retired)?;
    let embeddings = embed_nodes(&graph, m.config.embed_dim, rng::derive(m.config.partition_seed, "embed"))?;
    let hierarchy: PartitionHierarchy = read_json(&dir.join("hierarchy.json"))?;
    let em: EnsembleManifest = read_json(&dir.join("ensemble.json"))?;
    let mut ensemble = EnsembleState {
        aggregation: em.aggregation,
        lambda: em.lambda,
        tau: em.tau,
        tau_idx: em.tau_idx,
        scores: BTreeMap::new(),
        first: BTreeMap::new(),
        second: BTreeMap::new(),
    };
    for row in em.scores {
        ensemble.scores.insert(row.model.parent(), row.score);
    }
    for row in em.checkpoints {
        let model = checkpoint::load(&dir.join(&row.file), row.seed)?;
        ensemble.put(row.model, model);
    }
    let ledger: BTreeMap<ModelKey, BTreeMap<NodeId, Vec<NodeId>>> = read_json(&dir.join("ledger.json"))?;
    let mut event_log = Vec::new();
    let log_path = dir.join("event_log.jsonl");
    if log_path.exists() {
        for (i, line) in fs::read_to_string(&log_path)?.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let e: LogEntry = serde_json::from_str(line).map_err(|e| Error::Parse {
                path: log_path.clone(),
                line: i + 1,
                msg: e.to_string(),
            })?;
            event_log.push(e);
        }
    }
    let state = EngineState {
        config: m.config,
        graph,
        split: m.split,
        selector: m.selector,
        embeddings,
        hierarchy,
        ensemble,
        classes: m.classes,
        ledger,
        timestamp: m.timestamp,
        event_log,
        forgotten: m.forgotten,
    };
    Ok(state)
}
