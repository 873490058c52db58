//! Node embeddings via a seeded sparse random projection.

use std::collections::BTreeMap;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{channel_mean, GraphStore, NodeId};
use crate::rng;

/// `dim x input_dim` projection with entries `+-sqrt(3/dim)` at density 1/3.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Projection {
    input_dim: usize,
    dim: usize,
    matrix: Vec<f64>,
}

impl Projection {
    pub fn new(input_dim: usize, dim: usize, seed: u64) -> Result<Self> {
        if dim < 2 {
            return Err(Error::Config(format!("embedding dim must be >= 2, got {dim}")));
        }
        let scale = (3.0 / dim as f64).sqrt();
        let mut rng = rng::stream(seed, "projection");
        let matrix = (0..dim * input_dim)
            .map(|_| {
                let u: f64 = rng.random();
                if u < 1.0 / 6.0 {
                    scale
                } else if u < 1.0 / 3.0 {
                    -scale
                } else {
                    0.0
                }
            })
            .collect();
        Ok(Self { input_dim, dim, matrix })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    /// Row-major `dim x input_dim` entries.
    pub fn matrix(&self) -> &[f64] {
        &self.matrix
    }

    /// Projects and L2-normalizes; an all-zero projection stays zero.
    pub fn embed(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.input_dim);
        let mut y: Vec<f64> = self
            .matrix
            .chunks_exact(self.input_dim)
            .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
            .collect();
        let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            for v in &mut y {
                *v /= norm;
            }
        }
        y
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingIndex {
    projection: Projection,
    vectors: BTreeMap<NodeId, Vec<f64>>,
}

impl EmbeddingIndex {
    pub fn dim(&self) -> usize {
        self.projection.dim
    }

    pub fn projection(&self) -> &Projection {
        &self.projection
    }

    pub fn get(&self, v: NodeId) -> Option<&[f64]> {
        self.vectors.get(&v).map(Vec::as_slice)
    }

    pub fn vector(&self, v: NodeId) -> Result<&[f64]> {
        self.get(v).ok_or(Error::UnknownNode(v))
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    /// Embeds a (new) node from its raw `F x C` features with the same projection.
    pub fn insert(&mut self, v: NodeId, features: &[f64], channels: usize) -> &[f64] {
        let x = channel_mean(features, self.projection.input_dim, channels);
        let b = self.projection.embed(&x);
        self.vectors.insert(v, b);
        &self.vectors[&v]
    }

    pub fn insert_vector(&mut self, v: NodeId, b: Vec<f64>) {
        self.vectors.insert(v, b);
    }

    pub fn remove(&mut self, v: NodeId) -> Option<Vec<f64>> {
        self.vectors.remove(&v)
    }

    pub fn from_vectors(vectors: BTreeMap<NodeId, Vec<f64>>) -> Result<Self> {
        let dim = vectors.values().next().map_or(2, Vec::len);
        if vectors.values().any(|b| b.len() != dim || b.iter().any(|x| !x.is_finite())) {
            return Err(Error::Shape("embedding vectors must share a length and be finite".into()));
        }
        Ok(Self {
            projection: Projection {
                input_dim: 0,
                dim,
                matrix: Vec::new(),
            },
            vectors,
        })
    }
}

/// Embeds every node from its channel-averaged features.
pub fn embed_nodes(graph: &GraphStore, dim: usize, seed: u64) -> Result<EmbeddingIndex> {
    let projection = Projection::new(graph.feature_dim(), dim, seed)?;
    let mut index = EmbeddingIndex {
        projection,
        vectors: BTreeMap::new(),
    };
    for (id, rec) in graph.nodes() {
        index.insert(id, &rec.features, graph.channels());
    }
    Ok(index)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn graph_with(rows: &[Vec<f64>]) -> GraphStore {
        let mut g = GraphStore::new(rows[0].len(), 1);
        for (i, r) in rows.iter().enumerate() {
            g.add_node(i as NodeId, r.clone(), None).unwrap();
        }
        g
    }

    #[test]
    fn identical_rows_identical_embeddings() {
        let g = graph_with(&[vec![1.0, -2.0, 0.5, 3.0], vec![1.0, -2.0, 0.5, 3.0]]);
        let e = embed_nodes(&g, 8, 3).unwrap();
        assert_eq!(e.get(0), e.get(1));
    }

    #[test]
    fn nonzero_embeddings_are_unit_norm() {
        let g = graph_with(&[vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]]);
        let e = embed_nodes(&g, 16, 9).unwrap();
        let b = e.get(0).unwrap();
        let n: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!((n - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn zero_features_embed_to_zero() {
        let g = graph_with(&[vec![0.0; 5]]);
        let e = embed_nodes(&g, 4, 1).unwrap();
        assert!(e.get(0).unwrap().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn matches_plain_matrix_multiply() {
        let x = vec![0.5, -1.0, 2.0, 0.0, 3.0, -0.25, 1.5, 1.0];
        let g = graph_with(std::slice::from_ref(&x));
        let e = embed_nodes(&g, 4, 1).unwrap();
        let m = e.projection().matrix();
        let s = (3.0f64 / 4.0).sqrt();
        assert!(m.iter().all(|&v| v == 0.0 || v == s || v == -s));
        let mut y = [0.0; 4];
        for r in 0..4 {
            for c in 0..8 {
                y[r] += m[r * 8 + c] * x[c];
            }
        }
        let n = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        for (a, b) in e.get(0).unwrap().iter().zip(y) {
            assert!((a - b / n).abs() < 1e-12);
        }
    }

    #[test]
    fn density_is_about_one_third() {
        let p = Projection::new(300, 100, 4).unwrap();
        let nz = p.matrix().iter().filter(|&&v| v != 0.0).count() as f64 / p.matrix().len() as f64;
        assert!((nz - 1.0 / 3.0).abs() < 0.01, "{nz}");
    }

    #[test]
    fn tiny_dim_rejected() {
        assert!(Projection::new(4, 1, 0).is_err());
    }
}
