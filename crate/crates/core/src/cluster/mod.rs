//! Agglomerative clustering, threshold cuts, the per-topic cluster
//! hierarchy and cluster naming.
//!
//! Cluster labels follow the usual linkage-matrix convention: the `n` leaves
//! (sorted by id) are `0..n`, and the cluster created by merge step `s` is
//! `n + s`. Ward distances are the Lance-Williams recurrence on Euclidean
//! distances,
//!
//! `d(k, i∪j) = sqrt(((n_i+n_k)·d(k,i)² + (n_j+n_k)·d(k,j)² − n_k·d(i,j)²) / (n_i+n_j+n_k))`,
//!
//! which equals `sqrt(2·n_a·n_b/(n_a+n_b))·‖c_a − c_b‖` between clusters `a`
//! and `b`; two singletons therefore merge at their Euclidean distance.

mod hierarchy;
mod naming;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::{euclidean, Scalar};

/// A topic id with its `(publication id, embedding)` members.
pub type TopicMembers<T> = (String, Vec<(String, Vec<T>)>);

pub use hierarchy::{build_all, build_hierarchy, check_hierarchy, ClusterNode, ClusteringParams};
pub use naming::{
    dedup_names, llm_rename, name_clusters, ngrams, rank_labels, sample_titles, tfidf_name,
    IdfScope, RenameOutcome, TfidfModel, NGRAM_MAX, NGRAM_MIN,
};

#[derive(Debug, Error)]
pub enum ClusterError {
    #[error("{id:?} has dimension {found}, expected {expected}")]
    Dimension {
        id: String,
        expected: usize,
        found: usize,
    },
    #[error("duplicate item id {0:?}")]
    DuplicateId(String),
    #[error("invalid clustering parameters: {0}")]
    Params(String),
    #[error("hierarchy invariant violated: {0}")]
    Invariant(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Linkage {
    #[default]
    Ward,
    Complete,
    Average,
}

/// One agglomeration step joining clusters `a < b` into a cluster of `size`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Merge<T> {
    pub a: usize,
    pub b: usize,
    pub distance: T,
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Dendrogram<T> {
    /// Item ids in label order.
    pub leaves: Vec<String>,
    pub merges: Vec<Merge<T>>,
}

impl<T: Scalar> Dendrogram<T> {
    /// Leaf labels under cluster `label`, ascending.
    pub fn members(&self, label: usize) -> Vec<usize> {
        let n = self.leaves.len();
        let mut out = Vec::new();
        let mut stack = vec![label];
        while let Some(l) = stack.pop() {
            if l < n {
                out.push(l);
            } else {
                let m = &self.merges[l - n];
                stack.push(m.a);
                stack.push(m.b);
            }
        }
        out.sort_unstable();
        out
    }

    /// The two groups joined by the final merge, or `None` with < 2 leaves.
    pub fn last_split(&self) -> Option<(Vec<String>, Vec<String>)> {
        let last = self.merges.last()?;
        let ids = |label| {
            self.members(label)
                .into_iter()
                .map(|i| self.leaves[i].clone())
                .collect::<Vec<_>>()
        };
        let (x, y) = (ids(last.a), ids(last.b));
        Some(if x[0] <= y[0] { (x, y) } else { (y, x) })
    }
}

/// Bottom-up clustering of `items` under `linkage`.
///
/// Each step merges the closest pair. Pairs within the scalar's tie
/// tolerance of the minimum count as tied; among them the pair with the
/// smallest `(min label, max label)` wins.
pub fn agglomerate<T: Scalar>(
    items: &[(String, Vec<T>)],
    linkage: Linkage,
) -> Result<Dendrogram<T>, ClusterError> {
    let mut order: Vec<usize> = (0..items.len()).collect();
    order.sort_by(|&a, &b| items[a].0.cmp(&items[b].0));
    for w in order.windows(2) {
        if items[w[0]].0 == items[w[1]].0 {
            return Err(ClusterError::DuplicateId(items[w[0]].0.clone()));
        }
    }
    let n = items.len();
    let leaves: Vec<String> = order.iter().map(|&i| items[i].0.clone()).collect();
    if let Some(first) = items.first() {
        let dim = first.1.len();
        for (id, v) in items {
            if v.len() != dim {
                return Err(ClusterError::Dimension {
                    id: id.clone(),
                    expected: dim,
                    found: v.len(),
                });
            }
        }
    }

    let mut dist = vec![T::zero(); n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let d = euclidean(&items[order[i]].1, &items[order[j]].1);
            dist[i * n + j] = d;
            dist[j * n + i] = d;
        }
    }
    let mut label: Vec<usize> = (0..n).collect();
    let mut size: Vec<usize> = vec![1; n];
    let mut active: Vec<usize> = (0..n).collect();
    let mut merges = Vec::with_capacity(n.saturating_sub(1));
    let tol = T::tie_tolerance();

    for step in 0..n.saturating_sub(1) {
        let mut d_min = T::infinity();
        for (x, &i) in active.iter().enumerate() {
            for &j in &active[x + 1..] {
                d_min = d_min.min(dist[i * n + j]);
            }
        }
        let bound = d_min + tol * d_min.abs().max(T::one());
        let mut best: Option<(usize, usize, (usize, usize))> = None;
        for (x, &i) in active.iter().enumerate() {
            for &j in &active[x + 1..] {
                if dist[i * n + j] <= bound {
                    let key = (label[i].min(label[j]), label[i].max(label[j]));
                    if best.is_none_or(|(_, _, k)| key < k) {
                        best = Some((i, j, key));
                    }
                }
            }
        }
        let (i, j, (a, b)) = best.expect("at least two active clusters");
        let d_ij = dist[i * n + j];
        let (ni, nj) = (T::of(size[i] as f64), T::of(size[j] as f64));
        for &k in &active {
            if k == i || k == j {
                continue;
            }
            let (dik, djk) = (dist[i * n + k], dist[j * n + k]);
            let nk = T::of(size[k] as f64);
            let d = match linkage {
                Linkage::Ward => {
                    let num = (ni + nk) * dik * dik + (nj + nk) * djk * djk - nk * d_ij * d_ij;
                    (num / (ni + nj + nk)).max(T::zero()).sqrt()
                }
                Linkage::Complete => dik.max(djk),
                Linkage::Average => (ni * dik + nj * djk) / (ni + nj),
            };
            dist[i * n + k] = d;
            dist[k * n + i] = d;
        }
        size[i] += size[j];
        label[i] = n + step;
        active.retain(|&k| k != j);
        merges.push(Merge {
            a,
            b,
            distance: d_ij,
            size: size[i],
        });
    }
    Ok(Dendrogram { leaves, merges })
}

/// Groups formed by every merge at distance `<= threshold`. Ids inside a
/// group are sorted; groups are ordered by their first id.
pub fn cut<T: Scalar>(dendrogram: &Dendrogram<T>, threshold: T) -> Vec<Vec<String>> {
    let n = dendrogram.leaves.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    // Any leaf of a cluster stands in for the whole cluster.
    let mut rep: Vec<usize> = (0..n).collect();
    for m in &dendrogram.merges {
        let (ra, rb) = (rep[m.a], rep[m.b]);
        if m.distance <= threshold {
            let (x, y) = (find(&mut parent, ra), find(&mut parent, rb));
            parent[x.max(y)] = x.min(y);
        }
        rep.push(ra);
    }
    let mut groups: std::collections::BTreeMap<usize, Vec<String>> = Default::default();
    for i in 0..n {
        let root = find(&mut parent, i);
        groups
            .entry(root)
            .or_default()
            .push(dendrogram.leaves[i].clone());
    }
    // Leaves are id-sorted and roots are group minima, so both orders hold.
    groups.into_values().collect()
}
