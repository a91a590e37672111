//! Topic classification of free-text goals.
//!
//! The similarity path retrieves the `k` nearest publications, lets every
//! hit vote for its topics at the configured level and declares the query
//! out of scope when even the best hit is below the threshold. An external
//! provider can decide the main topic instead; transport failures fall back
//! to voting.

mod encoder;
mod metrics;
mod pipeline;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use tracing::warn;

use crate::graph::{EdgeKind, NodeKind, ScholarGraph};
use crate::index::{IndexError, VectorIndex};
use crate::ingest::{Taxonomy, TopicLevel};
use crate::provider::ProviderError;
use crate::scalar::Scalar;

pub use encoder::{KeywordProjectionEncoder, QueryEncoder};
pub use metrics::{evaluate, label_of, ClassMetrics, MetricsReport, NONE_LABEL};
pub use pipeline::{classify_goal, GoalClassification, TopicContext};

#[derive(Debug, Error)]
pub enum ClassifyError {
    #[error(transparent)]
    Index(#[from] IndexError),
    #[error("the vector index is empty")]
    EmptyIndex,
    #[error("no publication is linked to a {0}-level topic")]
    NoTopicEdges(&'static str),
    #[error("provider returned unknown label {0:?}")]
    UnknownLabel(String),
    #[error("invalid classifier config: {0}")]
    Config(String),
    #[error("cannot evaluate an empty prediction list")]
    EmptyEvaluation,
    #[error("query encoder failed: {0}")]
    Encoder(ProviderError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClassifierConfig {
    pub k: usize,
    pub oos_threshold: f64,
    pub level: TopicLevel,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        ClassifierConfig {
            k: 100,
            oos_threshold: 0.77,
            level: TopicLevel::Sub,
        }
    }
}

impl ClassifierConfig {
    pub fn validate(&self) -> Result<(), ClassifyError> {
        if self.k == 0 {
            return Err(ClassifyError::Config("k must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.oos_threshold) {
            return Err(ClassifyError::Config(
                "oos_threshold must lie in [0, 1]".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    SimilarityVote,
    ExternalProvider,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicPrediction {
    /// `None` means out of scope.
    pub topic_id: Option<String>,
    pub vote_counts: BTreeMap<String, usize>,
    /// Best cosine among the hits; absent when no vector search ran.
    pub max_similarity: Option<f64>,
    pub method: Method,
    /// Set when the provider failed and voting stood in for it.
    pub fallback: bool,
}

impl TopicPrediction {
    pub fn out_of_scope(method: Method) -> Self {
        TopicPrediction {
            topic_id: None,
            vote_counts: BTreeMap::new(),
            max_similarity: None,
            method,
            fallback: false,
        }
    }
}

fn level_topics(graph: &ScholarGraph, level: TopicLevel) -> BTreeSet<&str> {
    graph
        .nodes_of(NodeKind::Topic)
        .filter(|n| n.str_prop("level") == Some(level.as_str()))
        .map(|n| n.id.as_str())
        .collect()
}

/// Votes of the `k` nearest publications for topics at `cfg.level`.
pub fn classify_by_similarity<T: Scalar>(
    query: &[T],
    index: &VectorIndex<T>,
    graph: &ScholarGraph,
    cfg: &ClassifierConfig,
) -> Result<TopicPrediction, ClassifyError> {
    let eligible = level_topics(graph, cfg.level);
    vote(query, index, graph, cfg, &eligible)
}

/// Like [`classify_by_similarity`], but only topics in `allowed` receive
/// votes. Used to pick a subtopic under an already decided main topic.
pub fn classify_within<T: Scalar>(
    query: &[T],
    index: &VectorIndex<T>,
    graph: &ScholarGraph,
    cfg: &ClassifierConfig,
    allowed: &BTreeSet<String>,
) -> Result<TopicPrediction, ClassifyError> {
    let eligible: BTreeSet<&str> = level_topics(graph, cfg.level)
        .into_iter()
        .filter(|t| allowed.contains(*t))
        .collect();
    vote(query, index, graph, cfg, &eligible)
}

fn vote<T: Scalar>(
    query: &[T],
    index: &VectorIndex<T>,
    graph: &ScholarGraph,
    cfg: &ClassifierConfig,
    eligible: &BTreeSet<&str>,
) -> Result<TopicPrediction, ClassifyError> {
    cfg.validate()?;
    if index.is_empty() {
        return Err(ClassifyError::EmptyIndex);
    }
    let linked = eligible
        .iter()
        .any(|t| graph.in_neighbors(t, EdgeKind::HasTopic).next().is_some());
    if !linked {
        return Err(ClassifyError::NoTopicEdges(cfg.level.as_str()));
    }

    let hits = index.top_k(query, cfg.k)?;
    let max_similarity = hits[0].score.as_f64();
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    let mut support: HashMap<String, f64> = HashMap::new();
    for hit in &hits {
        for topic in graph.out_neighbors(&hit.id, EdgeKind::HasTopic) {
            if eligible.contains(topic) {
                *counts.entry(topic.to_string()).or_default() += 1;
                *support.entry(topic.to_string()).or_default() += hit.score.as_f64();
            }
        }
    }
    // BTreeMap iteration is id-ascending, so strict comparisons keep the
    // lowest id among full ties.
    let mut winner: Option<(&str, usize, f64)> = None;
    for (topic, &count) in &counts {
        let s = support[topic];
        let better = match winner {
            None => true,
            Some((_, c, ws)) => count > c || (count == c && s > ws),
        };
        if better {
            winner = Some((topic, count, s));
        }
    }
    let topic_id = if max_similarity < cfg.oos_threshold {
        None
    } else {
        winner.map(|(t, _, _)| t.to_string())
    };
    Ok(TopicPrediction {
        topic_id,
        vote_counts: counts,
        max_similarity: Some(max_similarity),
        method: Method::SimilarityVote,
        fallback: false,
    })
}

/// External classifier returning a topic name (or "None").
pub trait TopicProvider: Send + Sync {
    fn classify(&self, text: &str) -> Result<String, ProviderError>;
}

/// Resolves the provider's label against the taxonomy. Transport failures
/// run `fallback` and flag the result; unknown labels are errors.
pub fn classify_by_provider(
    text: &str,
    provider: &dyn TopicProvider,
    taxonomy: &Taxonomy,
    fallback: impl FnOnce() -> Result<TopicPrediction, ClassifyError>,
) -> Result<TopicPrediction, ClassifyError> {
    let label = match provider.classify(text) {
        Ok(label) => label,
        Err(e) => {
            warn!(error = %e, "topic provider failed; falling back to similarity vote");
            let mut p = fallback()?;
            p.fallback = true;
            return Ok(p);
        }
    };
    let label = label.trim().trim_matches('"').trim();
    if label.eq_ignore_ascii_case(NONE_LABEL) {
        return Ok(TopicPrediction::out_of_scope(Method::ExternalProvider));
    }
    let entry = taxonomy
        .get(label)
        .or_else(|| taxonomy.find_by_name(label))
        .ok_or_else(|| ClassifyError::UnknownLabel(label.to_string()))?;
    Ok(TopicPrediction {
        topic_id: Some(entry.id.clone()),
        ..TopicPrediction::out_of_scope(Method::ExternalProvider)
    })
}

/// Provider stub answering from a JSON map `{query text: label}`. Unknown
/// texts behave like an unreachable endpoint.
#[derive(Debug, Clone, Default)]
pub struct CannedTopicProvider {
    answers: HashMap<String, String>,
}

impl CannedTopicProvider {
    pub fn new(answers: HashMap<String, String>) -> Self {
        CannedTopicProvider { answers }
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, ProviderError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| ProviderError::Unavailable(format!("{}: {e}", path.display())))?;
        let answers = serde_json::from_str(&text)
            .map_err(|e| ProviderError::InvalidResponse(e.to_string()))?;
        Ok(Self::new(answers))
    }
}

impl TopicProvider for CannedTopicProvider {
    fn classify(&self, text: &str) -> Result<String, ProviderError> {
        self.answers
            .get(text)
            .cloned()
            .ok_or_else(|| ProviderError::Unavailable("no canned answer".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Node;
    use crate::ingest::TaxonomyEntry;

    fn setup() -> (ScholarGraph, VectorIndex<f64>) {
        let mut g = ScholarGraph::new();
        for (id, level) in [("m", "main"), ("t", "sub"), ("u", "sub")] {
            g.add_node(
                Node::new(id, NodeKind::Topic)
                    .with("name", id)
                    .with("definition", "d")
                    .with("level", level),
            )
            .unwrap();
        }
        let mut idx = VectorIndex::new(2);
        let papers = [
            ("p1", [1.0, 0.0], "t"),
            ("p2", [0.9, 0.1], "t"),
            ("p3", [0.95, 0.05], "t"),
            ("p4", [0.0, 1.0], "u"),
        ];
        for (id, v, topic) in papers {
            g.add_node(
                Node::new(id, NodeKind::Publication)
                    .with("title", id)
                    .with("abstract", "a")
                    .with("year", 2020i64),
            )
            .unwrap();
            g.add_edge(id, topic, EdgeKind::HasTopic).unwrap();
            g.add_edge(id, "m", EdgeKind::HasTopic).unwrap();
            idx.insert(id, &v).unwrap();
        }
        (g, idx)
    }

    fn cfg(k: usize) -> ClassifierConfig {
        ClassifierConfig {
            k,
            ..Default::default()
        }
    }

    #[test]
    fn unanimous_vote() {
        let (g, idx) = setup();
        let p = classify_by_similarity(&[1.0, 0.0], &idx, &g, &cfg(3)).unwrap();
        assert_eq!(p.topic_id.as_deref(), Some("t"));
        assert_eq!(p.vote_counts, BTreeMap::from([("t".to_string(), 3)]));
        assert!((p.max_similarity.unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn below_threshold_out_of_scope() {
        let (g, idx) = setup();
        let p = classify_by_similarity(&[-1.0, -1.0], &idx, &g, &cfg(4)).unwrap();
        assert_eq!(p.topic_id, None);
        assert_eq!(p.method, Method::SimilarityVote);
        assert_eq!(p.vote_counts.values().sum::<usize>(), 4);
    }

    #[test]
    fn tie_broken_by_support() {
        let (g, idx) = setup();
        // k=2 from (0.5, 0.7): p4 (u) and one of the t papers tie on count.
        let p = classify_by_similarity(&[0.5, 0.7], &idx, &g, &cfg(2)).unwrap();
        assert_eq!(p.vote_counts.len(), 2);
        assert_eq!(p.topic_id.as_deref(), Some("u"));
    }

    #[test]
    fn empty_index_and_missing_level_errors() {
        let (g, _) = setup();
        let empty = VectorIndex::<f64>::new(2);
        assert!(matches!(
            classify_by_similarity(&[1.0, 0.0], &empty, &g, &cfg(3)),
            Err(ClassifyError::EmptyIndex)
        ));
        let mut bare = ScholarGraph::new();
        bare.add_node(
            Node::new("p1", NodeKind::Publication)
                .with("title", "x")
                .with("abstract", "a")
                .with("year", 2020i64),
        )
        .unwrap();
        let (_, idx) = setup();
        assert!(matches!(
            classify_by_similarity(&[1.0, 0.0], &idx, &bare, &cfg(3)),
            Err(ClassifyError::NoTopicEdges("sub"))
        ));
    }

    #[test]
    fn main_level_votes() {
        let (g, idx) = setup();
        let c = ClassifierConfig {
            level: TopicLevel::Main,
            ..cfg(4)
        };
        let p = classify_by_similarity(&[1.0, 0.0], &idx, &g, &c).unwrap();
        assert_eq!(p.topic_id.as_deref(), Some("m"));
        assert_eq!(p.vote_counts["m"], 4);
    }

    fn taxonomy() -> Taxonomy {
        Taxonomy::new(vec![TaxonomyEntry {
            id: "tg".into(),
            name: "Text Generation".into(),
            definition: "d".into(),
            level: TopicLevel::Main,
            parent_id: None,
        }])
        .unwrap()
    }

    fn canned(label: &str) -> CannedTopicProvider {
        CannedTopicProvider::new(HashMap::from([("q".to_string(), label.to_string())]))
    }

    #[test]
    fn provider_paths() {
        let t = taxonomy();
        let never = || -> Result<TopicPrediction, ClassifyError> { unreachable!() };
        let p = classify_by_provider("q", &canned("Text Generation"), &t, never).unwrap();
        assert_eq!(p.topic_id.as_deref(), Some("tg"));
        assert_eq!(p.method, Method::ExternalProvider);
        let p = classify_by_provider("q", &canned("None"), &t, never).unwrap();
        assert_eq!(p.topic_id, None);
        assert!(matches!(
            classify_by_provider("q", &canned("Cooking"), &t, never),
            Err(ClassifyError::UnknownLabel(_))
        ));
    }

    #[test]
    fn provider_timeout_falls_back() {
        let t = taxonomy();
        let p = classify_by_provider("unknown", &canned("x"), &t, || {
            Ok(TopicPrediction {
                topic_id: Some("tg".into()),
                ..TopicPrediction::out_of_scope(Method::SimilarityVote)
            })
        })
        .unwrap();
        assert!(p.fallback);
        assert_eq!(p.method, Method::SimilarityVote);
    }
}
