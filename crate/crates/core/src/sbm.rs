//! Stochastic block model generator with block-correlated Gaussian features.

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{GraphStore, NodeId};
use crate::rng;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SbmSpec {
    pub blocks: usize,
    pub nodes_per_block: usize,
    pub p_in: f64,
    pub p_out: f64,
    pub feature_dim: usize,
    pub signal: f64,
    pub seed: u64,
}

impl Default for SbmSpec {
    fn default() -> Self {
        Self {
            blocks: 3,
            nodes_per_block: 100,
            p_in: 0.1,
            p_out: 0.01,
            feature_dim: 16,
            signal: 2.0,
            seed: 7,
        }
    }
}

/// Node `id` belongs to block `id / nodes_per_block`, which is also its label.
/// Feature `f` of a node in block `b` is standard normal, shifted by `signal`
/// when `f % blocks == b`.
pub fn generate_sbm(spec: &SbmSpec) -> Result<GraphStore> {
    let n = spec.blocks * spec.nodes_per_block;
    if n == 0 {
        return Err(Error::Config("SBM needs at least one node".into()));
    }
    if spec.feature_dim == 0 {
        return Err(Error::Config("SBM feature_dim must be positive".into()));
    }
    if !(0.0..=1.0).contains(&spec.p_in) || !(0.0..=spec.p_in).contains(&spec.p_out) {
        return Err(Error::Config(format!(
            "SBM needs 0 <= p_out <= p_in <= 1, got p_in={} p_out={}",
            spec.p_in, spec.p_out
        )));
    }
    if spec.signal.is_nan() || spec.signal < 0.0 {
        return Err(Error::Config("SBM signal must be non-negative".into()));
    }

    let block = |id: usize| id / spec.nodes_per_block;
    let mut g = GraphStore::new(spec.feature_dim, 1);
    let mut feat_rng = rng::stream(spec.seed, "sbm-features");
    for id in 0..n {
        let b = block(id);
        let x: Vec<f64> = (0..spec.feature_dim)
            .map(|f| {
                let z: f64 = StandardNormal.sample(&mut feat_rng);
                if f % spec.blocks == b {
                    z + spec.signal
                } else {
                    z
                }
            })
            .collect();
        g.add_node(id as NodeId, x, Some(b))?;
    }
    let mut edge_rng = rng::stream(spec.seed, "sbm-edges");
    for u in 0..n {
        for v in u + 1..n {
            let p = if block(u) == block(v) { spec.p_in } else { spec.p_out };
            if edge_rng.random::<f64>() < p {
                g.add_edge(u as NodeId, v as NodeId)?;
            }
        }
    }
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn desk_default_is_deterministic() {
        let spec = SbmSpec::default();
        let a = generate_sbm(&spec).unwrap();
        let b = generate_sbm(&spec).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 300);
        assert_eq!(a.num_classes(), 3);
        a.check_invariants().unwrap();
    }

    #[test]
    fn zero_probabilities_give_no_edges() {
        let spec = SbmSpec {
            p_in: 0.0,
            p_out: 0.0,
            ..Default::default()
        };
        assert_eq!(generate_sbm(&spec).unwrap().edge_count(), 0);
    }

    #[test]
    fn forced_cliques() {
        let spec = SbmSpec {
            blocks: 2,
            nodes_per_block: 50,
            p_in: 1.0,
            p_out: 0.0,
            feature_dim: 8,
            signal: 5.0,
            seed: 1,
        };
        let g = generate_sbm(&spec).unwrap();
        assert_eq!(g.edge_count(), 2 * 50 * 49 / 2);
        for (u, v) in g.edges() {
            assert_eq!(u / 50, v / 50);
        }
    }

    #[test]
    fn rejects_empty_and_bad_probabilities() {
        let empty = SbmSpec {
            nodes_per_block: 0,
            ..Default::default()
        };
        assert!(generate_sbm(&empty).is_err());
        let bad = SbmSpec {
            p_in: 0.1,
            p_out: 0.2,
            ..Default::default()
        };
        assert!(generate_sbm(&bad).is_err());
    }
}
