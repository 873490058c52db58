//! Two-layer feature graph network with a flattened linear readout.
//!
//! Per channel `c` (with `x_c` the channel's feature column and `w1_c` row `c`
//! of `W1`):
//!
//! ```text
//! H1_c = ReLU(Â_c x_c w1_cᵀ)        F' x H
//! H2_c = ReLU(Â_c H1_c W2)          F' x H
//! H2   = mean_c H2_c
//! p    = softmax(vec(H2)ᵀ W_out + b_out)
//! ```
//!
//! The readout keeps one weight block per feature row; pooling over rows would
//! make the network blind to which features are active.

use std::collections::BTreeSet;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fgn::grain::{channel_graph, column, Attention, ChannelGraph, Grain, LEAKY_SLOPE};
use crate::graph::NodeId;
use crate::rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    /// Feature-graph vertices `F'`.
    pub feat: usize,
    pub channels: usize,
    pub hidden: usize,
    pub classes: usize,
}

impl Dims {
    pub fn readout(&self) -> usize {
        self.feat * self.hidden
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Params {
    /// `C x H`.
    pub w1: Vec<f64>,
    /// `H x H`.
    pub w2: Vec<f64>,
    /// `(F' * H) x K`, row `f * H + h`.
    pub w_out: Vec<f64>,
    pub b_out: Vec<f64>,
    pub attention: Attention,
}

impl Params {
    pub fn zeros(d: &Dims) -> Self {
        Self {
            w1: vec![0.0; d.channels * d.hidden],
            w2: vec![0.0; d.hidden * d.hidden],
            w_out: vec![0.0; d.readout() * d.classes],
            b_out: vec![0.0; d.classes],
            attention: Attention::zeros(d.feat),
        }
    }

    /// Parameter groups in checkpoint order.
    pub fn groups(&self) -> [&[f64]; 7] {
        [
            &self.w1,
            &self.w2,
            &self.w_out,
            &self.b_out,
            &self.attention.w_self,
            &self.attention.w_nbr,
            std::slice::from_ref(&self.attention.bias),
        ]
    }

    pub fn groups_mut(&mut self) -> [&mut [f64]; 7] {
        [
            &mut self.w1,
            &mut self.w2,
            &mut self.w_out,
            &mut self.b_out,
            &mut self.attention.w_self,
            &mut self.attention.w_nbr,
            std::slice::from_mut(&mut self.attention.bias),
        ]
    }

    pub fn is_attention_group(g: usize) -> bool {
        g >= 4
    }

    /// `self += scale * other`, group by group.
    pub fn add_scaled(&mut self, other: &Params, scale: f64) {
        for (dst, src) in self.groups_mut().into_iter().zip(other.groups()) {
            for (a, b) in dst.iter_mut().zip(src) {
                *a += scale * b;
            }
        }
    }
}

pub const GROUP_NAMES: [&str; 7] = ["w1", "w2", "w_out", "b_out", "w_self", "w_nbr", "q"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubModel {
    pub dims: Dims,
    pub params: Params,
    pub seed: u64,
    /// Every node used in a gradient step since the last reset.
    pub trained_on: BTreeSet<NodeId>,
}

fn uniform(rng: &mut rng::Rng, out: &mut [f64], fan_in: usize, fan_out: usize) {
    let s = (6.0 / (fan_in + fan_out) as f64).sqrt();
    for v in out {
        *v = rng.random_range(-s..s);
    }
}

impl SubModel {
    pub fn new(dims: Dims, seed: u64) -> Self {
        let mut m = Self {
            dims,
            params: Params::zeros(&dims),
            seed,
            trained_on: BTreeSet::new(),
        };
        m.reset();
        m
    }

    /// Re-initializes from the model's own seed and clears the training record.
    pub fn reset(&mut self) {
        let d = self.dims;
        let mut r = rng::stream(self.seed, "init");
        let p = &mut self.params;
        *p = Params::zeros(&d);
        uniform(&mut r, &mut p.w1, d.channels, d.hidden);
        uniform(&mut r, &mut p.w2, d.hidden, d.hidden);
        uniform(&mut r, &mut p.w_out, d.readout(), d.classes);
        uniform(&mut r, &mut p.attention.w_self, d.feat, 1);
        uniform(&mut r, &mut p.attention.w_nbr, d.feat, 1);
        self.trained_on.clear();
    }

    /// Adds zero-initialized output classes up to `classes`; existing logits
    /// are unchanged.
    pub fn grow_classes(&mut self, classes: usize) {
        let old = self.dims.classes;
        if classes <= old {
            return;
        }
        let rows = self.dims.readout();
        let mut w = vec![0.0; rows * classes];
        for r in 0..rows {
            w[r * classes..r * classes + old].copy_from_slice(&self.params.w_out[r * old..(r + 1) * old]);
        }
        self.params.w_out = w;
        self.params.b_out.resize(classes, 0.0);
        self.dims.classes = classes;
    }

    pub fn check_grain(&self, g: &Grain) -> Result<()> {
        g.check_shape(self.dims.feat, self.dims.channels)
    }

    pub fn forward(&self, g: &Grain) -> Result<Forward> {
        self.check_grain(g)?;
        Ok(forward(&self.dims, &self.params, g))
    }

    pub fn predict_proba(&self, g: &Grain) -> Result<Vec<f64>> {
        Ok(self.forward(g)?.probs)
    }
}

/// Channel-level forward intermediates.
#[derive(Clone, Debug, Default)]
pub struct ChannelCache {
    pub graph: ChannelGraph,
    pub x: Vec<f64>,
    /// `Â x`.
    pub ax: Vec<f64>,
    pub g1: Vec<f64>,
    pub h1: Vec<f64>,
    /// `Â H1`.
    pub u: Vec<f64>,
    pub g2: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct Forward {
    pub channels: Vec<ChannelCache>,
    pub h2: Vec<f64>,
    pub logits: Vec<f64>,
    pub probs: Vec<f64>,
}

impl Forward {
    pub fn loss(&self, label: usize) -> f64 {
        let mx = self.logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = mx + self.logits.iter().map(|z| (z - mx).exp()).sum::<f64>().ln();
        lse - self.logits[label]
    }

    pub fn argmax(&self) -> usize {
        argmax(&self.probs)
    }
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for i in 1..v.len() {
        if v[i] > v[best] {
            best = i;
        }
    }
    best
}

pub fn softmax(z: &[f64]) -> Vec<f64> {
    let mx = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - mx).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

pub fn forward(d: &Dims, p: &Params, g: &Grain) -> Forward {
    let (f, h, c_n) = (d.feat, d.hidden, d.channels);
    let mut h2 = vec![0.0; f * h];
    let mut channels = Vec::with_capacity(c_n);
    for c in 0..c_n {
        let graph = channel_graph(g, &p.attention, c_n, c);
        let x = column(&g.features, c_n, c);
        let a = &graph.norm;
        let ax: Vec<f64> = (0..f).map(|r| (0..f).map(|s| a[r * f + s] * x[s]).sum()).collect();
        let w1 = &p.w1[c * h..(c + 1) * h];
        let mut g1 = vec![0.0; f * h];
        for r in 0..f {
            for k in 0..h {
                g1[r * h + k] = ax[r] * w1[k];
            }
        }
        let h1: Vec<f64> = g1.iter().map(|&v| v.max(0.0)).collect();
        let mut u = vec![0.0; f * h];
        for r in 0..f {
            let row = &mut u[r * h..(r + 1) * h];
            for s in 0..f {
                let w = a[r * f + s];
                if w != 0.0 {
                    for (acc, v) in row.iter_mut().zip(&h1[s * h..(s + 1) * h]) {
                        *acc += w * v;
                    }
                }
            }
        }
        let mut g2 = vec![0.0; f * h];
        for r in 0..f {
            for k2 in 0..h {
                let mut acc = 0.0;
                for k1 in 0..h {
                    acc += u[r * h + k1] * p.w2[k1 * h + k2];
                }
                g2[r * h + k2] = acc;
            }
        }
        for (acc, v) in h2.iter_mut().zip(&g2) {
            *acc += v.max(0.0) / c_n as f64;
        }
        channels.push(ChannelCache {
            graph,
            x,
            ax,
            g1,
            h1,
            u,
            g2,
        });
    }
    let k_n = d.classes;
    let mut logits = p.b_out.clone();
    for (r, &hv) in h2.iter().enumerate() {
        if hv != 0.0 {
            let row = &p.w_out[r * k_n..(r + 1) * k_n];
            for (z, w) in logits.iter_mut().zip(row) {
                *z += hv * w;
            }
        }
    }
    let probs = softmax(&logits);
    Forward {
        channels,
        h2,
        logits,
        probs,
    }
}

/// Analytic gradient of the cross-entropy loss for `label`.
pub fn backward(d: &Dims, p: &Params, g: &Grain, fw: &Forward, label: usize, with_attention: bool) -> Params {
    let (f, h, k_n, c_n) = (d.feat, d.hidden, d.classes, d.channels);
    let mut grad = Params::zeros(d);
    let mut dlog = fw.probs.clone();
    dlog[label] -= 1.0;
    grad.b_out.copy_from_slice(&dlog);
    let mut dh2 = vec![0.0; f * h];
    for (r, &hv) in fw.h2.iter().enumerate() {
        let row = &p.w_out[r * k_n..(r + 1) * k_n];
        let grow = &mut grad.w_out[r * k_n..(r + 1) * k_n];
        let mut acc = 0.0;
        for k in 0..k_n {
            grow[k] = hv * dlog[k];
            acc += row[k] * dlog[k];
        }
        dh2[r] = acc / c_n as f64;
    }

    let nbrs = g.effective_neighbors();
    for (c, cc) in fw.channels.iter().enumerate() {
        let a = &cc.graph.norm;
        let dg2: Vec<f64> = dh2.iter().zip(&cc.g2).map(|(d, &z)| if z > 0.0 { *d } else { 0.0 }).collect();
        // dW2 = Uᵀ dG2, dU = dG2 W2ᵀ
        let mut du = vec![0.0; f * h];
        for r in 0..f {
            for k1 in 0..h {
                let uv = cc.u[r * h + k1];
                let mut acc = 0.0;
                for k2 in 0..h {
                    let gz = dg2[r * h + k2];
                    grad.w2[k1 * h + k2] += uv * gz;
                    acc += gz * p.w2[k1 * h + k2];
                }
                du[r * h + k1] = acc;
            }
        }
        // dÂ from the second layer; dH1 = Âᵀ dU
        let mut da = vec![0.0; f * f];
        let mut dh1 = vec![0.0; f * h];
        for r in 0..f {
            let dur = &du[r * h..(r + 1) * h];
            for s in 0..f {
                let h1s = &cc.h1[s * h..(s + 1) * h];
                let mut acc = 0.0;
                for k in 0..h {
                    acc += dur[k] * h1s[k];
                }
                da[r * f + s] = acc;
                let w = a[r * f + s];
                if w != 0.0 {
                    for (dst, v) in dh1[s * h..(s + 1) * h].iter_mut().zip(dur) {
                        *dst += w * v;
                    }
                }
            }
        }
        let w1 = &p.w1[c * h..(c + 1) * h];
        let gw1 = &mut grad.w1[c * h..(c + 1) * h];
        let mut dax = vec![0.0; f];
        for r in 0..f {
            let mut acc = 0.0;
            for k in 0..h {
                let dz = if cc.g1[r * h + k] > 0.0 { dh1[r * h + k] } else { 0.0 };
                gw1[k] += cc.ax[r] * dz;
                acc += dz * w1[k];
            }
            dax[r] = acc;
        }
        if !with_attention {
            continue;
        }
        for r in 0..f {
            for s in 0..f {
                da[r * f + s] += dax[r] * cc.x[s];
            }
        }
        attention_backward(&cc.graph, &da, &cc.x, &nbrs, c, c_n, &mut grad.attention);
    }
    grad
}

/// Pushes `dL/dÂ` back through normalization, sgnroot, the outer product and
/// the attention softmax into the attention parameters.
fn attention_backward(
    cg: &ChannelGraph,
    d_norm: &[f64],
    x: &[f64],
    nbrs: &[&[f64]],
    c: usize,
    c_n: usize,
    grad: &mut Attention,
) {
    let f = x.len();
    let r_ = &cg.inv_sqrt_deg;
    let mut d_adj = vec![0.0; f * f];
    let mut d_r = vec![0.0; f];
    for r in 0..f {
        for s in 0..f {
            let g = d_norm[r * f + s];
            if g == 0.0 {
                continue;
            }
            let eye = if r == s { 1.0 } else { 0.0 };
            let a = cg.adj[r * f + s] + eye;
            d_adj[r * f + s] += g * r_[r] * r_[s];
            d_r[r] += g * a * r_[s];
            d_r[s] += g * a * r_[r];
        }
    }
    for r in 0..f {
        // r = D^{-1/2}  =>  dr/dD = -r^3 / 2
        let dd = -0.5 * d_r[r] * r_[r] * r_[r] * r_[r];
        for s in 0..f {
            let a = cg.adj[r * f + s];
            if a != 0.0 {
                d_adj[r * f + s] += dd * a.signum();
            }
        }
    }
    let n = nbrs.len() as f64;
    let mut d_xbar = vec![0.0; f];
    for r in 0..f {
        for s in 0..f {
            let a = cg.adj[r * f + s];
            if a != 0.0 {
                // d sgnroot(m)/dm = 1 / (2 sqrt|m|); sgnroot'(0) := 0
                let dm = d_adj[r * f + s] / (2.0 * a.abs());
                d_xbar[s] += dm * x[r] / n;
            }
        }
    }
    let d_omega: Vec<f64> = nbrs
        .iter()
        .map(|xj| (0..f).map(|s| xj[s * c_n + c] * d_xbar[s]).sum())
        .collect();
    let dot: f64 = cg.omega.iter().zip(&d_omega).map(|(w, d)| w * d).sum();
    for (j, xj) in nbrs.iter().enumerate() {
        let d_act = cg.omega[j] * (d_omega[j] - dot);
        let d_score = if cg.scores[j] > 0.0 { d_act } else { LEAKY_SLOPE * d_act };
        if d_score == 0.0 {
            continue;
        }
        for s in 0..f {
            grad.w_self[s] += d_score * x[s];
            grad.w_nbr[s] += d_score * xj[s * c_n + c];
        }
        grad.bias += d_score;
    }
}

pub fn loss_and_grad(model: &SubModel, g: &Grain, with_attention: bool) -> Result<(f64, Params)> {
    let label = g
        .label
        .ok_or_else(|| Error::Data(format!("grain of node {} has no label", g.node)))?;
    if label >= model.dims.classes {
        return Err(Error::Shape(format!(
            "label {label} outside a {}-class head",
            model.dims.classes
        )));
    }
    let fw = model.forward(g)?;
    let grad = backward(&model.dims, &model.params, g, &fw, label, with_attention);
    Ok((fw.loss(label), grad))
}
