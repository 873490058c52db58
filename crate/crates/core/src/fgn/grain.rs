//! Feature graph grains: one node turned into a small graph over its own
//! feature dimensions.
//!
//! For channel `c` with node features `x` and neighbor features `x_j`:
//!
//! ```text
//! a_j   = LeakyReLU(w_selfᵀ x + w_nbrᵀ x_j + q)
//! ω     = softmax_j(a)
//! A     = sgnroot( Σ_j ω_j x x_jᵀ / |N| )
//! Â     = D^{-1/2} (A + I) D^{-1/2},   D_ff = 1 + Σ_g |A_fg|
//! ```
//!
//! A node without neighbors is its own sole neighbor.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fgn::reduce::FeatureSelector;
use crate::graph::{GraphStore, NodeId};

pub const LEAKY_SLOPE: f64 = 0.2;

pub fn sgnroot(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x.signum() * x.abs().sqrt()
    }
}

pub fn leaky_relu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        LEAKY_SLOPE * x
    }
}

/// Learnable attention over a grain's neighbors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Attention {
    pub w_self: Vec<f64>,
    pub w_nbr: Vec<f64>,
    pub bias: f64,
}

impl Attention {
    pub fn zeros(dim: usize) -> Self {
        Self {
            w_self: vec![0.0; dim],
            w_nbr: vec![0.0; dim],
            bias: 0.0,
        }
    }
}

/// A self-contained training or inference sample: the node's reduced features
/// and copies of the neighbor features its feature graph is built from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grain {
    pub node: NodeId,
    pub label: Option<usize>,
    /// `F' x C` row-major.
    pub features: Vec<f64>,
    pub neighbor_ids: Vec<NodeId>,
    /// One `F' x C` matrix per neighbor, aligned with `neighbor_ids`.
    pub neighbor_features: Vec<Vec<f64>>,
}

impl Grain {
    /// Builds the grain of `v` over `neighbors` (ids must exist in `graph`).
    pub fn from_graph(graph: &GraphStore, selector: &FeatureSelector, v: NodeId, neighbors: &[NodeId]) -> Result<Self> {
        let features = selector.apply(graph.features(v)?);
        let neighbor_features = neighbors
            .iter()
            .map(|&u| graph.features(u).map(|x| selector.apply(x)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            node: v,
            label: graph.label(v),
            features,
            neighbor_ids: neighbors.to_vec(),
            neighbor_features,
        })
    }

    /// Number of feature-graph vertices `F'` given channel count `c`.
    pub fn feature_dim(&self, channels: usize) -> usize {
        self.features.len() / channels
    }

    /// Neighbor feature matrices actually used (the node itself when isolated).
    pub fn effective_neighbors(&self) -> Vec<&[f64]> {
        if self.neighbor_features.is_empty() {
            vec![self.features.as_slice()]
        } else {
            self.neighbor_features.iter().map(Vec::as_slice).collect()
        }
    }

    pub fn check_shape(&self, feat_dim: usize, channels: usize) -> Result<()> {
        let w = feat_dim * channels;
        if self.features.len() != w || self.neighbor_features.iter().any(|x| x.len() != w) {
            return Err(Error::Shape(format!(
                "grain of node {} does not match F'={feat_dim} C={channels}",
                self.node
            )));
        }
        if self.neighbor_ids.len() != self.neighbor_features.len() {
            return Err(Error::Shape(format!("grain of node {} has misaligned neighbors", self.node)));
        }
        Ok(())
    }
}

/// Per-channel attention intermediates.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ChannelGraph {
    /// Pre-activation attention scores.
    pub scores: Vec<f64>,
    /// Softmax attention weights, one per effective neighbor.
    pub omega: Vec<f64>,
    /// Attention-weighted neighbor feature column.
    pub xbar: Vec<f64>,
    /// `x xbarᵀ / |N|` before sgnroot, `F' x F'`.
    pub raw: Vec<f64>,
    /// Feature adjacency `A`, `F' x F'`.
    pub adj: Vec<f64>,
    /// `D^{-1/2}` diagonal.
    pub inv_sqrt_deg: Vec<f64>,
    /// Normalized adjacency `Â`, `F' x F'`.
    pub norm: Vec<f64>,
}

pub fn column(x: &[f64], channels: usize, c: usize) -> Vec<f64> {
    x.iter().skip(c).step_by(channels).copied().collect()
}

/// Builds the channel-`c` feature graph of `grain` under `att`.
pub fn channel_graph(grain: &Grain, att: &Attention, channels: usize, c: usize) -> ChannelGraph {
    let x = column(&grain.features, channels, c);
    let f = x.len();
    let nbrs: Vec<Vec<f64>> = grain
        .effective_neighbors()
        .into_iter()
        .map(|xj| column(xj, channels, c))
        .collect();
    let n = nbrs.len() as f64;

    let self_term: f64 = att.w_self.iter().zip(&x).map(|(w, v)| w * v).sum();
    let scores: Vec<f64> = nbrs
        .iter()
        .map(|xj| self_term + att.w_nbr.iter().zip(xj).map(|(w, v)| w * v).sum::<f64>() + att.bias)
        .collect();
    let act: Vec<f64> = scores.iter().map(|&s| leaky_relu(s)).collect();
    let mx = act.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = act.iter().map(|a| (a - mx).exp()).collect();
    let z: f64 = exps.iter().sum();
    let omega: Vec<f64> = exps.iter().map(|e| e / z).collect();

    let mut xbar = vec![0.0; f];
    for (w, xj) in omega.iter().zip(&nbrs) {
        for (acc, v) in xbar.iter_mut().zip(xj) {
            *acc += w * v;
        }
    }
    let mut raw = vec![0.0; f * f];
    let mut adj = vec![0.0; f * f];
    let mut deg = vec![1.0; f];
    for r in 0..f {
        for s in 0..f {
            let m = x[r] * xbar[s] / n;
            raw[r * f + s] = m;
            let a = sgnroot(m);
            adj[r * f + s] = a;
            deg[r] += a.abs();
        }
    }
    let inv_sqrt_deg: Vec<f64> = deg.iter().map(|d| 1.0 / d.sqrt()).collect();
    let mut norm = vec![0.0; f * f];
    for r in 0..f {
        for s in 0..f {
            let eye = if r == s { 1.0 } else { 0.0 };
            norm[r * f + s] = (adj[r * f + s] + eye) * inv_sqrt_deg[r] * inv_sqrt_deg[s];
        }
    }
    ChannelGraph {
        scores,
        omega,
        xbar,
        raw,
        adj,
        inv_sqrt_deg,
        norm,
    }
}

/// The grain together with its adjacency matrices under specific attention.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureGrain {
    pub grain: Grain,
    pub feat_adj: Vec<Vec<f64>>,
    pub norm_adj: Vec<Vec<f64>>,
    pub omega: Vec<Vec<f64>>,
}

pub fn build_grain(
    graph: &GraphStore,
    selector: &FeatureSelector,
    v: NodeId,
    neighbors: &[NodeId],
    att: &Attention,
) -> Result<FeatureGrain> {
    let grain = Grain::from_graph(graph, selector, v, neighbors)?;
    Ok(feature_grain(grain, att, graph.channels()))
}

pub fn feature_grain(grain: Grain, att: &Attention, channels: usize) -> FeatureGrain {
    let mut feat_adj = Vec::with_capacity(channels);
    let mut norm_adj = Vec::with_capacity(channels);
    let mut omega = Vec::with_capacity(channels);
    for c in 0..channels {
        let cg = channel_graph(&grain, att, channels, c);
        feat_adj.push(cg.adj);
        norm_adj.push(cg.norm);
        omega.push(cg.omega);
    }
    FeatureGrain {
        grain,
        feat_adj,
        norm_adj,
        omega,
    }
}
