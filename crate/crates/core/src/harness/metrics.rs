//! Evaluation metrics.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// Micro-averaged F1. Computed from pooled confusion counts and checked
/// against accuracy, which it equals for single-label predictions.
pub fn micro_f1(pred: &[usize], truth: &[usize]) -> Result<f64> {
    if pred.len() != truth.len() {
        return Err(Error::Shape(format!(
            "{} predictions for {} labels",
            pred.len(),
            truth.len()
        )));
    }
    if pred.is_empty() {
        return Err(Error::Empty("no predictions to score".into()));
    }
    let classes = pred.iter().chain(truth).max().map_or(0, |m| m + 1);
    let (mut tp, mut fp, mut fneg) = (vec![0usize; classes], vec![0usize; classes], vec![0usize; classes]);
    for (&p, &t) in pred.iter().zip(truth) {
        if p == t {
            tp[p] += 1;
        } else {
            fp[p] += 1;
            fneg[t] += 1;
        }
    }
    let (tp, fp, fneg): (usize, usize, usize) = (tp.iter().sum(), fp.iter().sum(), fneg.iter().sum());
    let precision = tp as f64 / (tp + fp) as f64;
    let recall = tp as f64 / (tp + fneg) as f64;
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    let acc = tp as f64 / pred.len() as f64;
    if (f1 - acc).abs() > 1e-12 {
        return Err(Error::Invariant(format!("micro-F1 {f1} differs from accuracy {acc}")));
    }
    Ok(f1)
}

/// Accuracy per true class.
pub fn class_accuracy(pred: &[usize], truth: &[usize]) -> BTreeMap<usize, f64> {
    let mut hit: BTreeMap<usize, (usize, usize)> = BTreeMap::new();
    for (&p, &t) in pred.iter().zip(truth) {
        let e = hit.entry(t).or_default();
        e.1 += 1;
        if p == t {
            e.0 += 1;
        }
    }
    hit.into_iter().map(|(c, (h, n))| (c, h as f64 / n as f64)).collect()
}

/// Per timestamp, the mean over classes evaluated both now and earlier of
/// `max(0, best earlier accuracy - current accuracy)`; 0 when no class has history.
pub fn forgetting_rate(table: &[BTreeMap<usize, f64>]) -> Vec<f64> {
    let mut best: BTreeMap<usize, f64> = BTreeMap::new();
    let mut out = Vec::with_capacity(table.len());
    for row in table {
        let drops: Vec<f64> = row
            .iter()
            .filter_map(|(c, &acc)| best.get(c).map(|&b| (b - acc).max(0.0)))
            .collect();
        out.push(if drops.is_empty() {
            0.0
        } else {
            drops.iter().sum::<f64>() / drops.len() as f64
        });
        for (&c, &acc) in row {
            let b = best.entry(c).or_insert(acc);
            *b = b.max(acc);
        }
    }
    out
}

/// Micro-F1 of predicting the most frequent training class (lowest on ties).
pub fn baseline_majority(train: &[usize], truth: &[usize]) -> Result<f64> {
    if train.is_empty() || truth.is_empty() {
        return Err(Error::Empty("majority baseline needs labels".into()));
    }
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    for &y in train {
        *counts.entry(y).or_default() += 1;
    }
    let top = counts.values().copied().max().unwrap_or(0);
    let class = counts.iter().find(|(_, &n)| n == top).map(|(&c, _)| c).unwrap_or(0);
    micro_f1(&vec![class; truth.len()], truth)
}
