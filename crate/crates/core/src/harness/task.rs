//! Running one task regime end to end.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::Instant;

use serde::Serialize;

use super::config::{DatasetSource, Regime, RunConfig};
use super::events::{check_regime, generate, Schedule};
use super::metrics::{baseline_majority, class_accuracy, forgetting_rate, micro_f1};
use crate::engine::{audit, bootstrap, save_state, AuditReport, EngineState};
use crate::error::{Error, Result};
use crate::graph::{GraphStore, NodeId};
use crate::io::{load_dataset, load_events, save_events};
use crate::sbm::generate_sbm;
use crate::split::split;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TimestampMetrics {
    pub t: u64,
    pub micro_f1: f64,
    pub forgetting_rate: f64,
    pub test_nodes: usize,
    pub fr: usize,
    pub ir: usize,
    pub retrained: usize,
    pub decommissioned: usize,
    pub wall_seconds: f64,
    pub class_accuracy: BTreeMap<usize, f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MetricsReport {
    pub regime: Regime,
    pub config: RunConfig,
    pub baseline_majority: f64,
    pub timestamps: Vec<TimestampMetrics>,
    pub audit: AuditReport,
}

impl MetricsReport {
    pub fn final_f1(&self) -> f64 {
        self.timestamps.last().map_or(0.0, |r| r.micro_f1)
    }

    /// Per-timestamp table; wall time is left out so reruns compare equal.
    pub fn metrics_csv(&self) -> String {
        let mut s = String::from("t,micro_f1,forgetting_rate,test_nodes,fr,ir,retrained,decommissioned\n");
        for r in &self.timestamps {
            let _ = writeln!(
                s,
                "{},{:.6},{:.6},{},{},{},{},{}",
                r.t, r.micro_f1, r.forgetting_rate, r.test_nodes, r.fr, r.ir, r.retrained, r.decommissioned
            );
        }
        s
    }

    pub fn class_accuracy_csv(&self) -> String {
        let mut s = String::from("t,class,accuracy\n");
        for r in &self.timestamps {
            for (c, a) in &r.class_accuracy {
                let _ = writeln!(s, "{},{c},{a:.6}", r.t);
            }
        }
        s
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("metrics.csv"), self.metrics_csv())?;
        fs::write(dir.join("class_accuracy.csv"), self.class_accuracy_csv())?;
        let mut json = serde_json::to_string_pretty(self)?;
        json.push('\n');
        fs::write(dir.join("report.json"), json)?;
        Ok(())
    }
}

pub fn load_graph(source: &DatasetSource) -> Result<GraphStore> {
    match source {
        DatasetSource::Sbm(spec) => generate_sbm(spec),
        DatasetSource::Files { nodes, edges } => {
            let (g, report) = load_dataset(nodes, edges)?;
            if report.self_loops_dropped > 0 || report.duplicates_dropped > 0 {
                log::info!(
                    "dataset: {} self-loops and {} duplicate edges dropped",
                    report.self_loops_dropped,
                    report.duplicates_dropped
                );
            }
            Ok(g)
        }
    }
}

/// Starting graph, split and event stream for a configuration.
pub fn schedule(cfg: &RunConfig) -> Result<Schedule> {
    let graph = load_graph(&cfg.dataset)?;
    let split = split(&graph, cfg.train_frac, cfg.valid_frac, cfg.split_seed)?;
    match &cfg.events {
        Some(path) => {
            let events = load_events(path, graph.feature_dim() * graph.channels())?;
            check_regime(cfg.regime, &events)?;
            // nodes that arrive later are not part of the starting graph
            let later: BTreeSet<NodeId> = events
                .iter()
                .flat_map(|e| e.add.iter().map(|n| n.id))
                .filter(|&v| graph.contains(v))
                .collect();
            let keep: BTreeSet<NodeId> = graph.node_ids().filter(|v| !later.contains(v)).collect();
            let mut split = split;
            for &v in &later {
                split.remove(v);
            }
            Ok(Schedule {
                graph: graph.induced(&keep),
                split,
                events,
            })
        }
        None => generate(cfg, &graph, &split),
    }
}

fn evaluate(state: &EngineState, seen: &BTreeSet<usize>) -> Result<(Vec<NodeId>, Vec<usize>, Vec<usize>)> {
    let nodes: Vec<NodeId> = state
        .split
        .test
        .iter()
        .copied()
        .filter(|&v| state.graph.label(v).is_some_and(|y| seen.contains(&y)))
        .collect();
    if nodes.is_empty() {
        return Err(Error::Empty("no test nodes of presented classes".into()));
    }
    let truth: Vec<usize> = nodes.iter().map(|&v| state.graph.label(v).expect("filtered")).collect();
    let pred: Vec<usize> = state.predict(&nodes)?.into_iter().map(|d| d.class).collect();
    Ok((nodes, pred, truth))
}

/// Runs a regime and returns its report with the final engine state.
pub fn run(cfg: &RunConfig) -> Result<(MetricsReport, EngineState)> {
    cfg.validate()?;
    let sch = schedule(cfg)?;
    let masked = cfg.regime == Regime::ClassIncremental;
    let mut seen: BTreeSet<usize> = if masked {
        sch.split.train.iter().filter_map(|&v| sch.graph.label(v)).collect()
    } else {
        (0..sch.graph.num_classes().max(1)).collect()
    };

    let clock = Instant::now();
    let (mut state, _) = bootstrap(sch.graph, sch.split, cfg.engine.clone())?;
    let mut wall = clock.elapsed().as_secs_f64();

    let train_labels: Vec<usize> = state.split.train.iter().filter_map(|&v| state.graph.label(v)).collect();
    let (_, pred, truth) = evaluate(&state, &seen)?;
    let baseline = baseline_majority(&train_labels, &truth)?;
    let mut rows = vec![TimestampMetrics {
        t: 0,
        micro_f1: micro_f1(&pred, &truth)?,
        forgetting_rate: 0.0,
        test_nodes: truth.len(),
        fr: 0,
        ir: 0,
        retrained: 0,
        decommissioned: 0,
        wall_seconds: wall,
        class_accuracy: class_accuracy(&pred, &truth),
    }];
    log::info!("t=0 micro-F1 {:.4} (majority {:.4}, {wall:.2}s)", rows[0].micro_f1, baseline);

    for (n, ev) in sch.events.iter().enumerate() {
        let clock = Instant::now();
        let (fr, _) = state.step(ev)?;
        wall = clock.elapsed().as_secs_f64();
        if masked {
            seen.extend(ev.add.iter().filter_map(|n| n.label));
        }
        let (_, pred, truth) = evaluate(&state, &seen)?;
        let row = TimestampMetrics {
            t: ev.t,
            micro_f1: micro_f1(&pred, &truth)?,
            forgetting_rate: 0.0,
            test_nodes: truth.len(),
            fr: ev.forget.len(),
            ir: ev.add.len(),
            retrained: fr.retrained.len(),
            decommissioned: fr.decommissioned.len(),
            wall_seconds: wall,
            class_accuracy: class_accuracy(&pred, &truth),
        };
        log::info!("t={} micro-F1 {:.4} ({} retrained, {wall:.2}s)", row.t, row.micro_f1, row.retrained);
        rows.push(row);
        if let Some(dir) = &cfg.state_dir {
            if cfg.checkpoint_every > 0 && (n + 1) % cfg.checkpoint_every == 0 {
                save_state(&state, dir)?;
            }
        }
    }
    let table: Vec<BTreeMap<usize, f64>> = rows.iter().map(|r| r.class_accuracy.clone()).collect();
    for (r, f) in rows.iter_mut().zip(forgetting_rate(&table)) {
        r.forgetting_rate = f;
    }

    let report = MetricsReport {
        regime: cfg.regime,
        config: cfg.clone(),
        baseline_majority: baseline,
        timestamps: rows,
        audit: audit(&state),
    };
    if let Some(dir) = &cfg.state_dir {
        save_state(&state, dir)?;
    }
    if let Some(dir) = &cfg.out_dir {
        report.write(dir)?;
        save_events(&dir.join("events.jsonl"), &sch.events)?;
    }
    Ok((report, state))
}

pub fn run_task(cfg: &RunConfig) -> Result<MetricsReport> {
    run(cfg).map(|(r, _)| r)
}
