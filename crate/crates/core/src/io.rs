//! Text formats: node/edge TSV datasets and JSON-lines event streams.
//!
//! Nodes file:
//! ```text
//! # F=<int> C=<int>
//! <node_id>\t<label or ->\t<idx:val,idx:val,...>
//! ```
//! Feature indices address the flattened `F x C` matrix (`f * C + c`);
//! missing indices are zero. Edges file: `<src>\t<dst>` per line,
//! undirected.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{GraphStore, NewNode, NodeId, TimelineEvent};

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct LoadReport {
    pub self_loops_dropped: usize,
    pub duplicates_dropped: usize,
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

fn parse_header(path: &Path, line: &str) -> Result<(usize, usize)> {
    let mut f = None;
    let mut c = None;
    for tok in line.trim_start_matches('#').split_whitespace() {
        if let Some(v) = tok.strip_prefix("F=") {
            f = Some(v.parse().map_err(|_| parse_err(path, 1, format!("bad F value {v:?}")))?);
        } else if let Some(v) = tok.strip_prefix("C=") {
            c = Some(v.parse().map_err(|_| parse_err(path, 1, format!("bad C value {v:?}")))?);
        }
    }
    match (f, c) {
        (Some(f), Some(c)) if f > 0 && c > 0 => Ok((f, c)),
        _ => Err(parse_err(path, 1, "header must be '# F=<int> C=<int>'")),
    }
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::Data(format!("{}: {e}", path.display())))
}

/// Parses `idx:val,idx:val` into a dense vector of length `width`.
pub fn parse_sparse(s: &str, width: usize) -> std::result::Result<Vec<f64>, String> {
    let mut x = vec![0.0; width];
    for pair in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (i, v) = pair.split_once(':').ok_or_else(|| format!("expected idx:val, got {pair:?}"))?;
        let i: usize = i.parse().map_err(|_| format!("bad feature index {i:?}"))?;
        let v: f64 = v.parse().map_err(|_| format!("bad feature value {v:?}"))?;
        if i >= width {
            return Err(format!("feature index {i} out of range (width {width})"));
        }
        if !v.is_finite() {
            return Err(format!("non-finite feature value at index {i}"));
        }
        x[i] = v;
    }
    Ok(x)
}

pub fn format_sparse(x: &[f64]) -> String {
    let parts: Vec<String> = x
        .iter()
        .enumerate()
        .filter(|(_, v)| **v != 0.0)
        .map(|(i, v)| format!("{i}:{v}"))
        .collect();
    parts.join(",")
}

pub fn load_dataset(nodes_path: &Path, edges_path: &Path) -> Result<(GraphStore, LoadReport)> {
    let reader = BufReader::new(open(nodes_path)?);
    let mut lines = reader.lines().enumerate();
    let (feature_dim, channels) = loop {
        match lines.next() {
            Some((i, line)) => {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                if !line.starts_with('#') {
                    return Err(parse_err(nodes_path, i + 1, "missing '# F=<int> C=<int>' header"));
                }
                break parse_header(nodes_path, &line)?;
            }
            None => return Err(parse_err(nodes_path, 1, "empty nodes file")),
        }
    };
    let width = feature_dim * channels;
    let mut graph = GraphStore::new(feature_dim, channels);
    for (i, line) in lines {
        let line = line?;
        let lineno = i + 1;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let mut cols = line.split('\t');
        let id: NodeId = cols
            .next()
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| parse_err(nodes_path, lineno, "bad node id"))?;
        let label = match cols.next().map(str::trim) {
            Some("-") => None,
            Some(s) => Some(s.parse::<usize>().map_err(|_| parse_err(nodes_path, lineno, format!("bad label {s:?}")))?),
            None => return Err(parse_err(nodes_path, lineno, "missing label column")),
        };
        let x = parse_sparse(cols.next().unwrap_or(""), width).map_err(|m| parse_err(nodes_path, lineno, m))?;
        if cols.next().is_some() {
            return Err(parse_err(nodes_path, lineno, "too many columns"));
        }
        graph.add_node(id, x, label).map_err(|e| parse_err(nodes_path, lineno, e.to_string()))?;
    }

    let mut report = LoadReport::default();
    let reader = BufReader::new(open(edges_path)?);
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = i + 1;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let mut cols = line.split_whitespace();
        let mut endpoint = || -> Result<NodeId> {
            cols.next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| parse_err(edges_path, lineno, "expected '<src>\\t<dst>'"))
        };
        let (u, v) = (endpoint()?, endpoint()?);
        for w in [u, v] {
            if !graph.contains(w) {
                return Err(Error::Data(format!(
                    "{}:{lineno}: edge endpoint {w} is not a known node",
                    edges_path.display()
                )));
            }
        }
        if u == v {
            report.self_loops_dropped += 1;
        } else if !graph.add_edge(u, v)? {
            report.duplicates_dropped += 1;
        }
    }
    if report.self_loops_dropped + report.duplicates_dropped > 0 {
        log::warn!(
            "dropped {} self-loops and {} duplicate edges",
            report.self_loops_dropped,
            report.duplicates_dropped
        );
    }
    Ok((graph, report))
}

pub fn save_dataset(graph: &GraphStore, nodes_path: &Path, edges_path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(nodes_path)?);
    writeln!(w, "# F={} C={}", graph.feature_dim(), graph.channels())?;
    for (id, rec) in graph.nodes() {
        let label = rec.label.map_or_else(|| "-".to_string(), |c| c.to_string());
        writeln!(w, "{id}\t{label}\t{}", format_sparse(&rec.features))?;
    }
    w.flush()?;
    let mut w = BufWriter::new(File::create(edges_path)?);
    for (u, v) in graph.edges() {
        writeln!(w, "{u}\t{v}")?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct IrLine {
    id: NodeId,
    #[serde(default)]
    label: Option<usize>,
    #[serde(default)]
    x: BTreeMap<String, f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct EventLine {
    t: u64,
    #[serde(default)]
    fr: Vec<NodeId>,
    #[serde(default)]
    ir: Vec<IrLine>,
}

/// Decodes one events-file line against a feature width of `F * C`.
pub fn parse_event_line(line: &str, width: usize) -> std::result::Result<TimelineEvent, String> {
    let ev: EventLine = serde_json::from_str(line).map_err(|e| e.to_string())?;
    let mut add = Vec::with_capacity(ev.ir.len());
    for ir in ev.ir {
        let mut features = vec![0.0; width];
        for (k, v) in ir.x {
            let i: usize = k.parse().map_err(|_| format!("bad feature index {k:?}"))?;
            if i >= width {
                return Err(format!("feature index {i} out of range (width {width})"));
            }
            features[i] = v;
        }
        add.push(NewNode {
            id: ir.id,
            features,
            label: ir.label,
        });
    }
    let forget: BTreeSet<NodeId> = ev.fr.into_iter().collect();
    Ok(TimelineEvent { t: ev.t, forget, add })
}

pub fn format_event_line(ev: &TimelineEvent) -> String {
    let line = EventLine {
        t: ev.t,
        fr: ev.forget.iter().copied().collect(),
        ir: ev
            .add
            .iter()
            .map(|n| IrLine {
                id: n.id,
                label: n.label,
                x: n
                    .features
                    .iter()
                    .enumerate()
                    .filter(|(_, v)| **v != 0.0)
                    .map(|(i, v)| (i.to_string(), *v))
                    .collect(),
            })
            .collect(),
    };
    serde_json::to_string(&line).expect("event serialization is infallible")
}

pub fn load_events(path: &Path, width: usize) -> Result<Vec<TimelineEvent>> {
    let reader = BufReader::new(open(path)?);
    let mut out: Vec<TimelineEvent> = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let ev = parse_event_line(&line, width).map_err(|m| parse_err(path, i + 1, m))?;
        if ev.t == 0 {
            return Err(parse_err(path, i + 1, "event timestamps start at 1"));
        }
        if let Some(prev) = out.last() {
            if ev.t <= prev.t {
                return Err(parse_err(path, i + 1, "events must be strictly increasing in t"));
            }
        }
        out.push(ev);
    }
    Ok(out)
}

pub fn save_events(path: &Path, events: &[TimelineEvent]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for ev in events {
        writeln!(w, "{}", format_event_line(ev))?;
    }
    w.flush()?;
    Ok(())
}

/// Converts a citation dataset in the classic `content`/`cites` layout
/// (`<doc>\t<w1>\t...\t<wF>\t<class name>` and `<cited>\t<citing>`) into
/// the nodes/edges TSV format. Document ids are remapped to `0..N` in file
/// order; class names are indexed in sorted order. Citations naming an
/// unknown document are skipped and counted.
pub fn convert_content_cites(
    content: &Path,
    cites: &Path,
    nodes_out: &Path,
    edges_out: &Path,
) -> Result<ConvertReport> {
    let reader = BufReader::new(open(content)?);
    let mut rows: Vec<(String, Vec<f64>, String)> = Vec::new();
    let mut width = None;
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split_whitespace().collect();
        if cols.len() < 3 {
            return Err(parse_err(content, i + 1, "expected id, features and class"));
        }
        let feats = &cols[1..cols.len() - 1];
        match width {
            None => width = Some(feats.len()),
            Some(w) if w != feats.len() => {
                return Err(parse_err(content, i + 1, format!("expected {w} features, got {}", feats.len())))
            }
            _ => {}
        }
        let x = feats
            .iter()
            .map(|s| s.parse::<f64>().map_err(|_| parse_err(content, i + 1, format!("bad feature {s:?}"))))
            .collect::<Result<Vec<_>>>()?;
        rows.push((cols[0].to_string(), x, cols[cols.len() - 1].to_string()));
    }
    let width = width.ok_or_else(|| Error::Data(format!("{} has no rows", content.display())))?;
    let classes: BTreeSet<&str> = rows.iter().map(|r| r.2.as_str()).collect();
    let class_idx: BTreeMap<&str, usize> = classes.iter().enumerate().map(|(i, c)| (*c, i)).collect();
    let ids: BTreeMap<&str, NodeId> = rows.iter().enumerate().map(|(i, r)| (r.0.as_str(), i as NodeId)).collect();
    if ids.len() != rows.len() {
        return Err(Error::Data(format!("{} contains duplicate ids", content.display())));
    }

    let mut graph = GraphStore::new(width, 1);
    for (i, (_, x, c)) in rows.iter().enumerate() {
        graph.add_node(i as NodeId, x.clone(), Some(class_idx[c.as_str()]))?;
    }
    let mut report = ConvertReport {
        nodes: rows.len(),
        features: width,
        classes: classes.iter().map(|s| s.to_string()).collect(),
        ..Default::default()
    };
    let reader = BufReader::new(open(cites)?);
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let cols: Vec<&str> = line.split_whitespace().collect();
        if cols.is_empty() {
            continue;
        }
        if cols.len() != 2 {
            return Err(parse_err(cites, i + 1, "expected '<cited>\\t<citing>'"));
        }
        report.citation_lines += 1;
        match (ids.get(cols[0]), ids.get(cols[1])) {
            (Some(&u), Some(&v)) => {
                if !graph.add_edge(u, v)? {
                    report.redundant_citations += 1;
                }
            }
            _ => report.unknown_endpoints += 1,
        }
    }
    report.undirected_edges = graph.edge_count();
    save_dataset(&graph, nodes_out, edges_out)?;
    Ok(report)
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct ConvertReport {
    pub nodes: usize,
    pub features: usize,
    pub classes: Vec<String>,
    pub citation_lines: usize,
    pub undirected_edges: usize,
    pub redundant_citations: usize,
    pub unknown_endpoints: usize,
}

/// Conventional file names inside a dataset directory.
pub fn dataset_paths(dir: &Path) -> (PathBuf, PathBuf) {
    (dir.join("nodes.tsv"), dir.join("edges.tsv"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
        let p = dir.join(name);
        std::fs::write(&p, body).unwrap();
        p
    }

    #[test]
    fn empty_edges_gives_isolated_nodes() {
        let dir = tempfile::tempdir().unwrap();
        let n = write(dir.path(), "n.tsv", "# F=3 C=1\n0\t0\t0:1\n1\t1\t2:0.5\n2\t-\t\n");
        let e = write(dir.path(), "e.tsv", "");
        let (g, rep) = load_dataset(&n, &e).unwrap();
        assert_eq!(g.len(), 3);
        assert_eq!(g.edge_count(), 0);
        assert_eq!(rep, LoadReport::default());
        assert_eq!(g.features(1).unwrap(), &[0.0, 0.0, 0.5]);
        assert_eq!(g.label(2), None);
    }

    #[test]
    fn reversed_duplicate_edge_collapses() {
        let dir = tempfile::tempdir().unwrap();
        let n = write(dir.path(), "n.tsv", "# F=1 C=1\n1\t0\t\n2\t0\t\n");
        let e = write(dir.path(), "e.tsv", "1\t2\n2\t1\n2\t2\n");
        let (g, rep) = load_dataset(&n, &e).unwrap();
        assert_eq!(g.edge_count(), 1);
        assert_eq!(rep.duplicates_dropped, 1);
        assert_eq!(rep.self_loops_dropped, 1);
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let dir = tempfile::tempdir().unwrap();
        let n = write(dir.path(), "n.tsv", "# F=2 C=1\n0\t0\t0:1\n1\tzz\t0:1\n");
        let e = write(dir.path(), "e.tsv", "");
        match load_dataset(&n, &e) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn dangling_edge_is_a_data_error() {
        let dir = tempfile::tempdir().unwrap();
        let n = write(dir.path(), "n.tsv", "# F=1 C=1\n0\t0\t\n");
        let e = write(dir.path(), "e.tsv", "0\t9\n");
        assert!(matches!(load_dataset(&n, &e), Err(Error::Data(_))));
    }

    #[test]
    fn event_line_decodes_sparse_features() {
        let ev = parse_event_line(r#"{"t":2,"fr":[3,1],"ir":[{"id":9,"label":1,"x":{"0":1.5,"2":-1}}]}"#, 3).unwrap();
        assert_eq!(ev.t, 2);
        assert_eq!(ev.forget, [1, 3].into());
        assert_eq!(ev.add[0].features, vec![1.5, 0.0, -1.0]);
        assert_eq!(ev.add[0].label, Some(1));
        let back = parse_event_line(&format_event_line(&ev), 3).unwrap();
        assert_eq!(back, ev);
    }

    #[test]
    fn content_cites_conversion() {
        let dir = tempfile::tempdir().unwrap();
        let content = write(
            dir.path(),
            "x.content",
            "p10\t1\t0\t0\tB\np20\t0\t1\t0\tA\np30\t0\t0\t1\tB\n",
        );
        let cites = write(dir.path(), "x.cites", "p10\tp20\np20\tp10\np30\tp99\np20\tp30\n");
        let (n, e) = dataset_paths(dir.path());
        let rep = convert_content_cites(&content, &cites, &n, &e).unwrap();
        assert_eq!(rep.citation_lines, 4);
        assert_eq!(rep.undirected_edges, 2);
        assert_eq!(rep.redundant_citations, 1);
        assert_eq!(rep.unknown_endpoints, 1);
        let (g, _) = load_dataset(&n, &e).unwrap();
        assert_eq!(g.len(), 3);
        assert_eq!(g.label(0), Some(1));
        assert_eq!(g.label(1), Some(0));
        assert_eq!(g.num_classes(), 2);
    }
}
