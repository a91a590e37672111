use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{agglomerate, cut, ClusterError, Linkage, TopicMembers};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClusteringParams {
    pub initial_threshold: f64,
    pub decay: f64,
    pub leaf_max: usize,
    pub linkage: Linkage,
}

impl Default for ClusteringParams {
    fn default() -> Self {
        ClusteringParams {
            initial_threshold: 10.0,
            decay: 0.8,
            leaf_max: 10,
            linkage: Linkage::Ward,
        }
    }
}

impl ClusteringParams {
    /// Comparisons are negated so that NaN fails them too.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<(), ClusterError> {
        if !(self.initial_threshold > 0.0) {
            return Err(ClusterError::Params("initial_threshold must be > 0".into()));
        }
        if !(self.decay > 0.0 && self.decay < 1.0) {
            return Err(ClusterError::Params("decay must lie in (0, 1)".into()));
        }
        if self.leaf_max < 2 {
            return Err(ClusterError::Params("leaf_max must be >= 2".into()));
        }
        Ok(())
    }

    /// Cut threshold for clusters created at `depth`.
    pub fn threshold_at(&self, depth: usize) -> f64 {
        self.initial_threshold * self.decay.powi(depth as i32)
    }
}

/// A node of a topic's cluster tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterNode {
    pub id: String,
    pub topic_id: String,
    pub parent_id: Option<String>,
    pub depth: usize,
    /// Sorted publication ids.
    pub member_ids: Vec<String>,
    /// Threshold of the cut that produced this node.
    pub threshold_used: f64,
    pub tfidf_name: String,
    pub display_name: String,
    /// Best tf·idf labels, best first (at most three).
    pub label_candidates: Vec<String>,
    /// Set when the members cannot be separated (identical embeddings).
    pub unsplittable: bool,
    pub leaf: bool,
}

impl ClusterNode {
    fn new(
        id: String,
        topic_id: &str,
        parent_id: Option<String>,
        depth: usize,
        member_ids: Vec<String>,
        threshold_used: f64,
    ) -> Self {
        ClusterNode {
            id,
            topic_id: topic_id.to_string(),
            parent_id,
            depth,
            member_ids,
            threshold_used,
            tfidf_name: String::new(),
            display_name: String::new(),
            label_candidates: Vec::new(),
            unsplittable: false,
            leaf: true,
        }
    }
}

/// Builds the cluster tree of one topic.
///
/// Level 0 is the cut of all members at the initial threshold. Any cluster
/// with at least `leaf_max` members is re-clustered on its own at the
/// threshold of the next depth; a cut that yields a single group is replaced
/// by the two halves of the final merge, unless every member embedding is
/// identical, in which case the node is marked unsplittable. Nodes come out
/// in depth-first pre-order.
pub fn build_hierarchy<T: Scalar>(
    topic_id: &str,
    members: &[(String, Vec<T>)],
    params: &ClusteringParams,
) -> Result<Vec<ClusterNode>, ClusterError> {
    params.validate()?;
    if members.is_empty() {
        return Ok(Vec::new());
    }
    let vectors: BTreeMap<&str, &[T]> = members
        .iter()
        .map(|(id, v)| (id.as_str(), v.as_slice()))
        .collect();
    if vectors.len() != members.len() {
        let mut seen = BTreeSet::new();
        let dup = members
            .iter()
            .find(|(id, _)| !seen.insert(id))
            .expect("duplicate");
        return Err(ClusterError::DuplicateId(dup.0.clone()));
    }
    let all: Vec<String> = vectors.keys().map(|s| s.to_string()).collect();

    let roots = if all.len() < params.leaf_max {
        vec![all]
    } else {
        split(&all, &vectors, params.threshold_at(0), params)?.unwrap_or_else(|| vec![all])
    };

    let mut out = Vec::new();
    for (i, group) in roots.into_iter().enumerate() {
        let node = ClusterNode::new(
            format!("{topic_id}/c{i}"),
            topic_id,
            None,
            0,
            group,
            params.threshold_at(0),
        );
        grow(node, &vectors, params, &mut out)?;
    }
    check_hierarchy(&out, params.leaf_max)?;
    Ok(out)
}

/// Partitions `ids` at `threshold`, forcing a two-way split if the cut
/// keeps everything together. `None` means the members are inseparable.
fn split<T: Scalar>(
    ids: &[String],
    vectors: &BTreeMap<&str, &[T]>,
    threshold: f64,
    params: &ClusteringParams,
) -> Result<Option<Vec<Vec<String>>>, ClusterError> {
    let first = vectors[ids[0].as_str()];
    if ids.iter().all(|id| vectors[id.as_str()] == first) {
        return Ok(None);
    }
    let items: Vec<(String, Vec<T>)> = ids
        .iter()
        .map(|id| (id.clone(), vectors[id.as_str()].to_vec()))
        .collect();
    let dendrogram = agglomerate(&items, params.linkage)?;
    let groups = cut(&dendrogram, T::of(threshold));
    if groups.len() > 1 {
        return Ok(Some(groups));
    }
    let (a, b) = dendrogram.last_split().expect("two or more members");
    Ok(Some(vec![a, b]))
}

fn grow<T: Scalar>(
    mut node: ClusterNode,
    vectors: &BTreeMap<&str, &[T]>,
    params: &ClusteringParams,
    out: &mut Vec<ClusterNode>,
) -> Result<(), ClusterError> {
    if node.member_ids.len() < params.leaf_max {
        out.push(node);
        return Ok(());
    }
    let child_depth = node.depth + 1;
    let threshold = params.threshold_at(child_depth);
    let Some(groups) = split(&node.member_ids, vectors, threshold, params)? else {
        node.unsplittable = true;
        out.push(node);
        return Ok(());
    };
    node.leaf = false;
    let (id, topic, depth) = (node.id.clone(), node.topic_id.clone(), node.depth);
    out.push(node);
    for (j, group) in groups.into_iter().enumerate() {
        let child = ClusterNode::new(
            format!("{id}.{j}"),
            &topic,
            Some(id.clone()),
            depth + 1,
            group,
            threshold,
        );
        grow(child, vectors, params, out)?;
    }
    Ok(())
}

/// Builds every topic's hierarchy in parallel; output follows input order.
pub fn build_all<T: Scalar>(
    topics: &[TopicMembers<T>],
    params: &ClusteringParams,
) -> Result<Vec<ClusterNode>, ClusterError> {
    let per_topic: Vec<Result<Vec<ClusterNode>, ClusterError>> = topics
        .par_iter()
        .map(|(topic, members)| build_hierarchy(topic, members, params))
        .collect();
    let mut out = Vec::new();
    for nodes in per_topic {
        out.extend(nodes?);
    }
    Ok(out)
}

/// Checks containment, disjointness, exact cover, depth and leaf flags.
pub fn check_hierarchy(nodes: &[ClusterNode], leaf_max: usize) -> Result<(), ClusterError> {
    let violation = |m: String| Err(ClusterError::Invariant(m));
    let by_id: BTreeMap<&str, &ClusterNode> = nodes.iter().map(|n| (n.id.as_str(), n)).collect();
    if by_id.len() != nodes.len() {
        return violation("duplicate cluster id".into());
    }
    let mut children: BTreeMap<&str, Vec<&ClusterNode>> = BTreeMap::new();
    let mut roots: BTreeMap<&str, Vec<&ClusterNode>> = BTreeMap::new();
    for n in nodes {
        if n.member_ids.is_empty() {
            return violation(format!("{} is empty", n.id));
        }
        if n.member_ids.windows(2).any(|w| w[0] >= w[1]) {
            return violation(format!("{} members not sorted and unique", n.id));
        }
        match &n.parent_id {
            Some(p) => {
                let Some(parent) = by_id.get(p.as_str()) else {
                    return violation(format!("{} has missing parent {p}", n.id));
                };
                if parent.depth + 1 != n.depth || parent.topic_id != n.topic_id {
                    return violation(format!("{} inconsistent with parent {p}", n.id));
                }
                children.entry(p).or_default().push(n);
            }
            None => {
                if n.depth != 0 {
                    return violation(format!("root {} has depth {}", n.id, n.depth));
                }
                roots.entry(&n.topic_id).or_default().push(n);
            }
        }
    }
    let disjoint = |group: &[&ClusterNode]| -> Result<BTreeSet<String>, ClusterError> {
        let mut union = BTreeSet::new();
        for c in group {
            for m in &c.member_ids {
                if !union.insert(m.clone()) {
                    return Err(ClusterError::Invariant(format!(
                        "{m} appears in more than one sibling"
                    )));
                }
            }
        }
        Ok(union)
    };
    for group in roots.values() {
        disjoint(group)?;
    }
    for n in nodes {
        let kids = children
            .get(n.id.as_str())
            .map(Vec::as_slice)
            .unwrap_or(&[]);
        if n.leaf != kids.is_empty() {
            return violation(format!("{} leaf flag disagrees with its children", n.id));
        }
        if kids.is_empty() {
            if n.member_ids.len() >= leaf_max && !n.unsplittable {
                return violation(format!("leaf {} has {} members", n.id, n.member_ids.len()));
            }
            continue;
        }
        if kids.len() < 2 {
            return violation(format!("{} has a single child", n.id));
        }
        let union = disjoint(kids)?;
        if union.len() != n.member_ids.len() || !n.member_ids.iter().all(|m| union.contains(m)) {
            return violation(format!("children of {} do not cover it exactly", n.id));
        }
    }
    Ok(())
}
