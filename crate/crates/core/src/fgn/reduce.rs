//! Variance-based feature selection shared by every grain.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{GraphStore, NodeId};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSelector {
    pub input_dim: usize,
    pub channels: usize,
    /// Selected original feature indices, ascending.
    pub indices: Vec<usize>,
}

impl FeatureSelector {
    pub fn identity(input_dim: usize, channels: usize) -> Self {
        Self {
            input_dim,
            channels,
            indices: (0..input_dim).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.indices.len()
    }

    /// Reduced `F' x C` row-major copy of a raw `F x C` feature matrix.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let c = self.channels;
        let mut out = Vec::with_capacity(self.indices.len() * c);
        for &f in &self.indices {
            out.extend_from_slice(&x[f * c..(f + 1) * c]);
        }
        out
    }
}

/// Keeps the `min(F, cap)` features with the highest variance over `train`
/// (ties to the lower index).
pub fn reduce_features(graph: &GraphStore, train: &BTreeSet<NodeId>, cap: usize) -> Result<FeatureSelector> {
    if cap < 2 {
        return Err(Error::Config(format!("feature cap must be >= 2, got {cap}")));
    }
    let (f_dim, c) = (graph.feature_dim(), graph.channels());
    if cap >= f_dim {
        return Ok(FeatureSelector::identity(f_dim, c));
    }
    let mut sum = vec![0.0; f_dim];
    let mut sq = vec![0.0; f_dim];
    let mut count = 0usize;
    for &v in train {
        let x = graph.features(v)?;
        for f in 0..f_dim {
            for ch in 0..c {
                let val = x[f * c + ch];
                sum[f] += val;
                sq[f] += val * val;
            }
        }
        count += c;
    }
    let n = count.max(1) as f64;
    let var: Vec<f64> = (0..f_dim).map(|f| sq[f] / n - (sum[f] / n).powi(2)).collect();
    let mut order: Vec<usize> = (0..f_dim).collect();
    order.sort_by(|&a, &b| var[b].total_cmp(&var[a]).then(a.cmp(&b)));
    let mut indices = order[..cap].to_vec();
    indices.sort_unstable();
    Ok(FeatureSelector {
        input_dim: f_dim,
        channels: c,
        indices,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn graph(rows: &[&[f64]]) -> GraphStore {
        let mut g = GraphStore::new(rows[0].len(), 1);
        for (i, r) in rows.iter().enumerate() {
            g.add_node(i as NodeId, r.to_vec(), Some(0)).unwrap();
        }
        g
    }

    #[test]
    fn cap_above_dim_is_identity() {
        let g = graph(&[&[1.0, 2.0, 3.0], &[0.0, 1.0, 0.0]]);
        let s = reduce_features(&g, &[0, 1].into(), 8).unwrap();
        assert_eq!(s.indices, vec![0, 1, 2]);
    }

    #[test]
    fn keeps_high_variance_with_low_index_ties() {
        // variances: f0 = 0, f1 = 1, f2 = 1, f3 = 0.25
        let g = graph(&[&[1.0, 0.0, 5.0, 0.0], &[1.0, 2.0, 3.0, 1.0]]);
        let s = reduce_features(&g, &[0, 1].into(), 2).unwrap();
        assert_eq!(s.indices, vec![1, 2]);
        assert_eq!(s.apply(&[9.0, 8.0, 7.0, 6.0]), vec![8.0, 7.0]);
    }

    #[test]
    fn wide_input_shape() {
        let rows: Vec<Vec<f64>> = (0..5).map(|i| (0..1433).map(|f| ((f * 7 + i) % 5) as f64).collect()).collect();
        let refs: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
        let g = graph(&refs);
        let s = reduce_features(&g, &(0..5).collect(), 64).unwrap();
        assert_eq!(s.dim(), 64);
    }
}
