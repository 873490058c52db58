//! Balanced embedding k-means.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::graph::NodeId;
use crate::partition::blpa::{check_feasible, keyed_order};
use crate::partition::embed::EmbeddingIndex;

pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Mean of the members' embeddings, summed in ascending id order.
pub fn centroid(members: &BTreeSet<NodeId>, emb: &EmbeddingIndex) -> Result<Option<Vec<f64>>> {
    if members.is_empty() {
        return Ok(None);
    }
    let mut m = vec![0.0; emb.dim()];
    for &v in members {
        for (acc, x) in m.iter_mut().zip(emb.vector(v)?) {
            *acc += x;
        }
    }
    let n = members.len() as f64;
    m.iter_mut().for_each(|x| *x /= n);
    Ok(Some(m))
}

pub type BekmResult = (Vec<BTreeSet<NodeId>>, Vec<Option<Vec<f64>>>);

pub fn partition_bekm(
    emb: &EmbeddingIndex,
    nodes: &BTreeSet<NodeId>,
    k: usize,
    delta: usize,
    seed: u64,
    max_iters: usize,
) -> Result<BekmResult> {
    if nodes.len() < k {
        return Err(Error::Infeasible {
            level: "bekm".into(),
            msg: format!("{} nodes cannot seed {k} centroids", nodes.len()),
        });
    }
    check_feasible(nodes.len(), k, delta, "bekm")?;
    let centroids = keyed_order(nodes, seed)
        .into_iter()
        .take(k)
        .map(|v| emb.vector(v).map(<[f64]>::to_vec))
        .collect::<Result<Vec<_>>>()?;
    bekm_from(emb, nodes, centroids, delta, max_iters)
}

/// Capacity-constrained Lloyd passes from given centroids. Each pass assigns
/// nodes in ascending id order to the nearest centroid whose shard is below
/// `delta` (lowest index on ties), then recomputes centroids as member means;
/// an emptied shard keeps its previous centroid during iteration.
pub fn bekm_from(
    emb: &EmbeddingIndex,
    nodes: &BTreeSet<NodeId>,
    mut centroids: Vec<Vec<f64>>,
    delta: usize,
    max_iters: usize,
) -> Result<BekmResult> {
    let k = centroids.len();
    check_feasible(nodes.len(), k, delta, "bekm")?;
    let vectors: Vec<(NodeId, &[f64])> = nodes
        .iter()
        .map(|&v| emb.vector(v).map(|b| (v, b)))
        .collect::<Result<_>>()?;

    let mut assign: Vec<usize> = Vec::new();
    let mut ranked: Vec<(f64, usize)> = Vec::with_capacity(k);
    for _ in 0..max_iters.max(1) {
        let mut next = Vec::with_capacity(vectors.len());
        let mut sizes = vec![0usize; k];
        for (_, b) in &vectors {
            ranked.clear();
            ranked.extend(centroids.iter().enumerate().map(|(i, m)| (sq_dist(b, m), i)));
            ranked.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
            let dst = ranked
                .iter()
                .map(|&(_, i)| i)
                .find(|&i| sizes[i] < delta)
                .expect("feasibility guarantees residual capacity");
            sizes[dst] += 1;
            next.push(dst);
        }
        for (i, m) in centroids.iter_mut().enumerate() {
            if sizes[i] == 0 {
                continue;
            }
            m.iter_mut().for_each(|x| *x = 0.0);
            for ((_, b), _) in vectors.iter().zip(&next).filter(|(_, &s)| s == i) {
                for (acc, x) in m.iter_mut().zip(b.iter()) {
                    *acc += x;
                }
            }
            let n = sizes[i] as f64;
            m.iter_mut().for_each(|x| *x /= n);
        }
        let stable = next == assign;
        assign = next;
        if stable {
            break;
        }
    }

    let mut shards = vec![BTreeSet::new(); k];
    for ((v, _), s) in vectors.iter().zip(&assign) {
        shards[*s].insert(*v);
    }
    let cents = shards.iter().map(|s| centroid(s, emb)).collect::<Result<Vec<_>>>()?;
    Ok((shards, cents))
}
