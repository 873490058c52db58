//! Train / validation / test assignment.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{GraphStore, NodeId};
use crate::rng;

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitAssignment {
    pub train: BTreeSet<NodeId>,
    pub valid: BTreeSet<NodeId>,
    pub test: BTreeSet<NodeId>,
}

impl SplitAssignment {
    pub fn check(&self, graph: &GraphStore) -> Result<()> {
        if !self.train.is_disjoint(&self.valid) || !self.train.is_disjoint(&self.test) || !self.valid.is_disjoint(&self.test) {
            return Err(Error::Invariant("split sets overlap".into()));
        }
        for &v in self.train.iter().chain(&self.valid).chain(&self.test) {
            if graph.label(v).is_none() {
                return Err(Error::Invariant(format!("split node {v} is missing or unlabeled")));
            }
        }
        Ok(())
    }

    pub fn remove(&mut self, v: NodeId) {
        self.train.remove(&v);
        self.valid.remove(&v);
        self.test.remove(&v);
    }
}

/// `floor(frac * n)` with a guard against representation error (0.2 * 1000 = 199.999...).
pub fn floor_count(frac: f64, n: usize) -> usize {
    (frac * n as f64 + 1e-9).floor() as usize
}

/// Splits `total` across groups proportionally to `sizes` (largest remainder,
/// ties to the lower group index). Each group's share is capped at its size.
fn apportion(total: usize, sizes: &[usize]) -> Vec<usize> {
    let n: usize = sizes.iter().sum();
    if n == 0 {
        return vec![0; sizes.len()];
    }
    let mut quota: Vec<usize> = sizes.iter().map(|&s| s * total / n).collect();
    let mut rema: Vec<(usize, usize)> = sizes.iter().enumerate().map(|(i, &s)| ((s * total) % n, i)).collect();
    rema.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    let mut left = total - quota.iter().sum::<usize>();
    for &(_, i) in rema.iter().cycle().take(2 * sizes.len()) {
        if left == 0 {
            break;
        }
        if quota[i] < sizes[i] {
            quota[i] += 1;
            left -= 1;
        }
    }
    quota
}

/// Seeded split of the labeled nodes: `floor((1 - train_frac) * N)` test nodes,
/// then `floor(valid_frac * rest)` validation nodes, the remainder trains.
/// Stratified by class when every class has at least three labeled nodes.
pub fn split(graph: &GraphStore, train_frac: f64, valid_frac: f64, seed: u64) -> Result<SplitAssignment> {
    for (name, f) in [("train_frac", train_frac), ("valid_frac", valid_frac)] {
        if !(f > 0.0 && f < 1.0) {
            return Err(Error::Config(format!("{name} must lie in (0, 1), got {f}")));
        }
    }
    let mut by_class: BTreeMap<usize, Vec<NodeId>> = BTreeMap::new();
    for (id, rec) in graph.nodes() {
        if let Some(c) = rec.label {
            by_class.entry(c).or_default().push(id);
        }
    }
    let n: usize = by_class.values().map(Vec::len).sum();
    if n < 10 {
        return Err(Error::Data(format!("need at least 10 labeled nodes to split, have {n}")));
    }
    let test_total = floor_count(1.0 - train_frac, n);
    let valid_total = floor_count(valid_frac, n - test_total);
    let mut rng = rng::stream(seed, "split");
    let mut out = SplitAssignment::default();

    if by_class.values().all(|v| v.len() >= 3) {
        let classes: Vec<usize> = by_class.keys().copied().collect();
        let mut lists: Vec<Vec<NodeId>> = by_class.into_values().collect();
        for l in &mut lists {
            l.shuffle(&mut rng);
        }
        let sizes: Vec<usize> = lists.iter().map(Vec::len).collect();
        let test_q = apportion(test_total, &sizes);
        let rest: Vec<usize> = sizes.iter().zip(&test_q).map(|(s, q)| s - q).collect();
        let valid_q = apportion(valid_total, &rest);
        for (ci, l) in lists.iter().enumerate() {
            let (t, v) = (test_q[ci], valid_q[ci]);
            out.test.extend(&l[..t]);
            out.valid.extend(&l[t..t + v]);
            out.train.extend(&l[t + v..]);
            if l.len() == t + v {
                return Err(Error::Data(format!("class {} has no training nodes after split", classes[ci])));
            }
        }
    } else {
        log::warn!("some class has fewer than 3 labeled nodes; splitting without stratification");
        let mut all: Vec<NodeId> = by_class.values().flatten().copied().collect();
        all.sort_unstable();
        all.shuffle(&mut rng);
        out.test.extend(&all[..test_total]);
        out.valid.extend(&all[test_total..test_total + valid_total]);
        out.train.extend(&all[test_total + valid_total..]);
        let missing: Vec<usize> = by_class
            .iter()
            .filter(|(_, ids)| !ids.iter().any(|v| out.train.contains(v)))
            .map(|(&c, _)| c)
            .collect();
        if !missing.is_empty() {
            return Err(Error::Data(format!("classes {missing:?} have no training nodes after split")));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labeled_graph(n: u64, classes: usize) -> GraphStore {
        let mut g = GraphStore::new(1, 1);
        for id in 0..n {
            g.add_node(id, vec![0.0], Some(id as usize % classes)).unwrap();
        }
        g
    }

    #[test]
    fn sizes_follow_floor_convention() {
        let g = labeled_graph(1000, 4);
        let s = split(&g, 0.8, 0.1, 3).unwrap();
        assert_eq!((s.test.len(), s.valid.len(), s.train.len()), (200, 80, 720));
        s.check(&g).unwrap();
    }

    #[test]
    fn cora_sized_test_count() {
        let g = labeled_graph(2708, 7);
        let s = split(&g, 0.8, 0.1, 11).unwrap();
        // floor(0.2 * 2708) = floor(541.6)
        assert_eq!(s.test.len(), 541);
    }

    #[test]
    fn deterministic_under_seed() {
        let g = labeled_graph(300, 3);
        assert_eq!(split(&g, 0.8, 0.1, 5).unwrap(), split(&g, 0.8, 0.1, 5).unwrap());
        assert_ne!(split(&g, 0.8, 0.1, 5).unwrap(), split(&g, 0.8, 0.1, 6).unwrap());
    }

    #[test]
    fn stratified_classes_keep_proportions() {
        let g = labeled_graph(300, 3);
        let s = split(&g, 0.8, 0.1, 1).unwrap();
        for c in 0..3 {
            let t = s.test.iter().filter(|&&v| g.label(v) == Some(c)).count();
            assert_eq!(t, 20);
        }
    }

    #[test]
    fn rejects_bad_fraction() {
        let g = labeled_graph(30, 3);
        assert!(matches!(split(&g, 1.0, 0.1, 0), Err(Error::Config(_))));
    }

    #[test]
    fn apportion_is_exact() {
        assert_eq!(apportion(10, &[5, 5, 5]), vec![4, 3, 3]);
        assert_eq!(apportion(0, &[3, 3]), vec![0, 0]);
        assert_eq!(apportion(3, &[1, 9]), vec![0, 3]);
    }
}
