//! Progress-aware model selection and hierarchical aggregation.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fgn::model::argmax;
use crate::fgn::{Grain, SubModel};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum Aggregation {
    /// Weighted mean of probability vectors.
    #[default]
    #[serde(rename = "mean")]
    Mean,
    /// Weighted vote of argmax decisions.
    #[serde(rename = "majority")]
    Majority,
}

impl std::str::FromStr for Aggregation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mean" | "meanaggr" => Ok(Aggregation::Mean),
            "majority" | "maj" | "majaggr" => Ok(Aggregation::Majority),
            _ => Err(Error::Config(format!("unknown aggregation {s:?}"))),
        }
    }
}

impl std::fmt::Display for Aggregation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Aggregation::Mean => "mean",
            Aggregation::Majority => "majority",
        })
    }
}

/// Fraction of validation grains each model classifies correctly.
pub fn score_models<'a, I>(models: I, valid: &[Grain]) -> Result<BTreeMap<usize, f64>>
where
    I: IntoIterator<Item = (usize, &'a SubModel)>,
{
    if valid.is_empty() {
        return Err(Error::Empty("validation set".into()));
    }
    let mut out = BTreeMap::new();
    for (i, m) in models {
        out.insert(i, crate::fgn::accuracy(m, valid)?);
    }
    Ok(out)
}

/// The `tau` lowest-scoring indices; ties go to the lower index.
pub fn low_rank(scores: &BTreeMap<usize, f64>, tau: usize) -> BTreeSet<usize> {
    let mut v: Vec<(usize, f64)> = scores.iter().map(|(&i, &s)| (i, s)).collect();
    v.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    v.into_iter().take(tau).map(|(i, _)| i).collect()
}

/// Combines weighted class distributions. Zero-weight members are ignored.
/// `Majority` returns the normalized vote mass per class.
pub fn combine(strategy: Aggregation, items: &[(f64, &[f64])]) -> Vec<f64> {
    let k = items.iter().map(|(_, p)| p.len()).max().unwrap_or(0);
    let mut acc = vec![0.0; k];
    let mut total = 0.0;
    for &(w, p) in items {
        if w == 0.0 {
            continue;
        }
        total += w;
        match strategy {
            Aggregation::Mean => {
                for (a, v) in acc.iter_mut().zip(p) {
                    *a += w * v;
                }
            }
            Aggregation::Majority => acc[argmax(p)] += w,
        }
    }
    if total > 0.0 {
        for a in &mut acc {
            *a /= total;
        }
    }
    acc
}

/// One first-level model's view of a node: its own distribution plus the
/// distributions of its second-level supporters (empty when unsupported).
#[derive(Clone, Debug, PartialEq)]
pub struct Votes {
    pub alpha: Vec<f64>,
    pub support: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Decision {
    pub class: usize,
    pub combined: Vec<f64>,
    /// Per first-level model after inner aggregation.
    pub alphas: Vec<Vec<f64>>,
}

/// Inner aggregation gives `alpha` weight `1 - lambda` and each supporter
/// `lambda / l`; the outer aggregation weighs first-level models equally.
pub fn aggregate(strategy: Aggregation, lambda: f64, l: usize, votes: &[Votes]) -> Decision {
    let alphas: Vec<Vec<f64>> = votes
        .iter()
        .map(|v| {
            if v.support.is_empty() || lambda == 0.0 {
                return v.alpha.clone();
            }
            let w = lambda / l.max(1) as f64;
            let mut items: Vec<(f64, &[f64])> = vec![(1.0 - lambda, &v.alpha)];
            items.extend(v.support.iter().map(|b| (w, b.as_slice())));
            combine(strategy, &items)
        })
        .collect();
    let items: Vec<(f64, &[f64])> = alphas.iter().map(|a| (1.0, a.as_slice())).collect();
    let combined = combine(strategy, &items);
    Decision {
        class: argmax(&combined),
        combined,
        alphas,
    }
}
