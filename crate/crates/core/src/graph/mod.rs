//! Typed property graph of publications, authors, venues, topics and
//! thematic clusters.
//!
//! Node ids are global. Publications and topics keep their corpus ids,
//! authors and venues are keyed `author:<name>` / `venue:<name>`, clusters by
//! their hierarchy id. Every edge kind connects exactly one pair of node kinds
//! (see [`EdgeKind::endpoints`]) and the graph refuses anything else.

mod build;
mod persist;
mod template;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use build::{attach_clusters, author_id, build_graph, detach_clusters, venue_id};
pub use persist::{load_graph, persist, GraphDocument, SCHEMA_VERSION};
pub use template::{
    builtin_template, builtin_templates, run_template, Direction, Filter, Hop, Parameter,
    QueryTemplate, Row, Selector,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum NodeKind {
    Publication,
    Author,
    Venue,
    Topic,
    Cluster,
}

impl NodeKind {
    /// Property keys every node of this kind must carry.
    pub fn required_properties(self) -> &'static [&'static str] {
        match self {
            NodeKind::Publication => &["title", "abstract", "year"],
            NodeKind::Author | NodeKind::Venue => &["name"],
            NodeKind::Topic => &["name", "definition", "level"],
            NodeKind::Cluster => &["name", "topic_id", "depth", "size"],
        }
    }
}

impl fmt::Display for NodeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum EdgeKind {
    AuthoredBy,
    PublishedIn,
    HasTopic,
    SubtopicOf,
    InCluster,
    ChildClusterOf,
    ClusterOfTopic,
    Cites,
}

impl EdgeKind {
    pub const ALL: [EdgeKind; 8] = [
        EdgeKind::AuthoredBy,
        EdgeKind::PublishedIn,
        EdgeKind::HasTopic,
        EdgeKind::SubtopicOf,
        EdgeKind::InCluster,
        EdgeKind::ChildClusterOf,
        EdgeKind::ClusterOfTopic,
        EdgeKind::Cites,
    ];

    /// The (source, target) node kinds this edge kind connects.
    pub fn endpoints(self) -> (NodeKind, NodeKind) {
        use NodeKind::*;
        match self {
            EdgeKind::AuthoredBy => (Publication, Author),
            EdgeKind::PublishedIn => (Publication, Venue),
            EdgeKind::HasTopic => (Publication, Topic),
            EdgeKind::SubtopicOf => (Topic, Topic),
            EdgeKind::InCluster => (Publication, Cluster),
            EdgeKind::ChildClusterOf => (Cluster, Cluster),
            EdgeKind::ClusterOfTopic => (Cluster, Topic),
            EdgeKind::Cites => (Publication, Publication),
        }
    }
}

impl fmt::Display for EdgeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).expect("edge kind serializes");
        f.write_str(s.as_str().unwrap_or_default())
    }
}

/// Scalar property value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PropValue {
    Bool(bool),
    Int(i64),
    Float(f64),
    Str(String),
}

impl PropValue {
    pub fn as_str(&self) -> Option<&str> {
        match self {
            PropValue::Str(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_int(&self) -> Option<i64> {
        match self {
            PropValue::Int(i) => Some(*i),
            _ => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            PropValue::Bool(b) => Some(*b),
            _ => None,
        }
    }
}

impl From<&str> for PropValue {
    fn from(s: &str) -> Self {
        PropValue::Str(s.to_string())
    }
}

impl From<String> for PropValue {
    fn from(s: String) -> Self {
        PropValue::Str(s)
    }
}

impl From<i64> for PropValue {
    fn from(v: i64) -> Self {
        PropValue::Int(v)
    }
}

impl From<bool> for PropValue {
    fn from(v: bool) -> Self {
        PropValue::Bool(v)
    }
}

impl From<f64> for PropValue {
    fn from(v: f64) -> Self {
        PropValue::Float(v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub id: String,
    pub kind: NodeKind,
    pub props: BTreeMap<String, PropValue>,
}

impl Node {
    pub fn new(id: impl Into<String>, kind: NodeKind) -> Self {
        Node {
            id: id.into(),
            kind,
            props: BTreeMap::new(),
        }
    }

    pub fn with(mut self, key: &str, value: impl Into<PropValue>) -> Self {
        self.props.insert(key.to_string(), value.into());
        self
    }

    pub fn prop(&self, key: &str) -> Option<&PropValue> {
        self.props.get(key)
    }

    pub fn str_prop(&self, key: &str) -> Option<&str> {
        self.props.get(key).and_then(PropValue::as_str)
    }

    pub fn name(&self) -> Option<&str> {
        self.str_prop("name").or_else(|| self.str_prop("title"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Edge {
    pub from: String,
    pub to: String,
    pub kind: EdgeKind,
}

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("duplicate node id {0:?}")]
    DuplicateNode(String),
    #[error("unknown node {0:?}")]
    MissingNode(String),
    #[error("{kind} node {id:?} lacks required property {key:?}")]
    MissingProperty {
        id: String,
        kind: NodeKind,
        key: &'static str,
    },
    #[error(
        "schema violation: {edge} cannot connect {from:?} ({from_kind}) to {to:?} ({to_kind})"
    )]
    SchemaViolation {
        edge: EdgeKind,
        from: String,
        from_kind: NodeKind,
        to: String,
        to_kind: NodeKind,
    },
    #[error("unknown template {0:?}")]
    UnknownTemplate(String),
    #[error("invalid template {name:?}: {reason}")]
    InvalidTemplate { name: String, reason: String },
    #[error("unbound parameter {0:?}")]
    UnboundParameter(String),
    #[error("binding for undeclared parameter {0:?}")]
    UnknownParameter(String),
    #[error("parameter {param:?} expects a {expected} node but {id:?} is a {found}")]
    KindMismatch {
        param: String,
        expected: NodeKind,
        found: NodeKind,
        id: String,
    },
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("malformed graph file: {0}")]
    Format(String),
    #[error("graph file has schema version {found}, expected {expected}")]
    VersionMismatch { found: u32, expected: u32 },
}

type Adjacency = BTreeMap<String, BTreeSet<(EdgeKind, String)>>;

/// The scholarly knowledge graph.
///
/// Adjacency is kept in both directions so template hops are cheap either
/// way. All maps are ordered, which makes iteration and persistence
/// deterministic.
#[derive(Debug, Clone, Default)]
pub struct ScholarGraph {
    nodes: BTreeMap<String, Node>,
    out: Adjacency,
    inc: Adjacency,
    names: BTreeMap<NodeKind, BTreeMap<String, BTreeSet<String>>>,
    edge_count: usize,
}

impl PartialEq for ScholarGraph {
    fn eq(&self, other: &Self) -> bool {
        self.nodes == other.nodes && self.out == other.out
    }
}

impl ScholarGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_node(&mut self, node: Node) -> Result<(), GraphError> {
        if self.nodes.contains_key(&node.id) {
            return Err(GraphError::DuplicateNode(node.id));
        }
        for &key in node.kind.required_properties() {
            if !node.props.contains_key(key) {
                return Err(GraphError::MissingProperty {
                    id: node.id,
                    kind: node.kind,
                    key,
                });
            }
        }
        if let Some(name) = node.name() {
            self.names
                .entry(node.kind)
                .or_default()
                .entry(name.to_lowercase())
                .or_default()
                .insert(node.id.clone());
        }
        self.nodes.insert(node.id.clone(), node);
        Ok(())
    }

    /// Adds an edge after checking both endpoints and the kind pairing.
    /// Returns `false` if the identical edge already existed.
    pub fn add_edge(&mut self, from: &str, to: &str, kind: EdgeKind) -> Result<bool, GraphError> {
        let from_node = self
            .nodes
            .get(from)
            .ok_or_else(|| GraphError::MissingNode(from.to_string()))?;
        let to_node = self
            .nodes
            .get(to)
            .ok_or_else(|| GraphError::MissingNode(to.to_string()))?;
        let (want_from, want_to) = kind.endpoints();
        if from_node.kind != want_from || to_node.kind != want_to {
            return Err(GraphError::SchemaViolation {
                edge: kind,
                from: from.to_string(),
                from_kind: from_node.kind,
                to: to.to_string(),
                to_kind: to_node.kind,
            });
        }
        let fresh = self
            .out
            .entry(from.to_string())
            .or_default()
            .insert((kind, to.to_string()));
        if fresh {
            self.inc
                .entry(to.to_string())
                .or_default()
                .insert((kind, from.to_string()));
            self.edge_count += 1;
        }
        Ok(fresh)
    }

    pub fn remove_edge(&mut self, from: &str, to: &str, kind: EdgeKind) -> bool {
        let removed = self
            .out
            .get_mut(from)
            .is_some_and(|s| s.remove(&(kind, to.to_string())));
        if removed {
            if let Some(s) = self.inc.get_mut(to) {
                s.remove(&(kind, from.to_string()));
            }
            self.edge_count -= 1;
            prune(&mut self.out, from);
            prune(&mut self.inc, to);
        }
        removed
    }

    /// Removes a node together with every incident edge.
    pub fn remove_node(&mut self, id: &str) -> Option<Node> {
        let node = self.nodes.remove(id)?;
        let outgoing: Vec<_> = self.out.get(id).into_iter().flatten().cloned().collect();
        for (kind, to) in outgoing {
            self.remove_edge(id, &to, kind);
        }
        let incoming: Vec<_> = self.inc.get(id).into_iter().flatten().cloned().collect();
        for (kind, from) in incoming {
            self.remove_edge(&from, id, kind);
        }
        if let Some(name) = node.name() {
            if let Some(by_name) = self.names.get_mut(&node.kind) {
                let key = name.to_lowercase();
                if let Some(ids) = by_name.get_mut(&key) {
                    ids.remove(id);
                    if ids.is_empty() {
                        by_name.remove(&key);
                    }
                }
            }
        }
        Some(node)
    }

    pub fn node(&self, id: &str) -> Option<&Node> {
        self.nodes.get(id)
    }

    pub fn contains(&self, id: &str) -> bool {
        self.nodes.contains_key(id)
    }

    pub fn nodes(&self) -> impl Iterator<Item = &Node> {
        self.nodes.values()
    }

    pub fn nodes_of(&self, kind: NodeKind) -> impl Iterator<Item = &Node> {
        self.nodes.values().filter(move |n| n.kind == kind)
    }

    /// All edges ordered by (from, kind, to).
    pub fn edges(&self) -> impl Iterator<Item = Edge> + '_ {
        self.out.iter().flat_map(|(from, set)| {
            set.iter().map(move |(kind, to)| Edge {
                from: from.clone(),
                to: to.clone(),
                kind: *kind,
            })
        })
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    pub fn count_nodes(&self, kind: NodeKind) -> usize {
        self.nodes_of(kind).count()
    }

    pub fn count_edges(&self, kind: EdgeKind) -> usize {
        self.out
            .values()
            .flatten()
            .filter(|(k, _)| *k == kind)
            .count()
    }

    /// Targets of outgoing `kind` edges, ascending.
    pub fn out_neighbors<'a>(
        &'a self,
        id: &str,
        kind: EdgeKind,
    ) -> impl Iterator<Item = &'a str> + 'a {
        self.out
            .get(id)
            .into_iter()
            .flatten()
            .filter(move |(k, _)| *k == kind)
            .map(|(_, to)| to.as_str())
    }

    /// Sources of incoming `kind` edges, ascending.
    pub fn in_neighbors<'a>(
        &'a self,
        id: &str,
        kind: EdgeKind,
    ) -> impl Iterator<Item = &'a str> + 'a {
        self.inc
            .get(id)
            .into_iter()
            .flatten()
            .filter(move |(k, _)| *k == kind)
            .map(|(_, from)| from.as_str())
    }

    pub fn neighbors<'a>(
        &'a self,
        id: &str,
        kind: EdgeKind,
        dir: Direction,
    ) -> Box<dyn Iterator<Item = &'a str> + 'a> {
        match dir {
            Direction::Out => Box::new(self.out_neighbors(id, kind)),
            Direction::In => Box::new(self.in_neighbors(id, kind)),
        }
    }

    /// Ids of `kind` nodes whose name (or title) matches case-insensitively.
    pub fn find_by_name(&self, kind: NodeKind, name: &str) -> Vec<&str> {
        self.names
            .get(&kind)
            .and_then(|m| m.get(&name.trim().to_lowercase()))
            .map(|ids| ids.iter().map(String::as_str).collect())
            .unwrap_or_default()
    }

    /// Verifies that every edge endpoint exists and respects the schema.
    pub fn check_integrity(&self) -> Result<(), GraphError> {
        for edge in self.edges() {
            let from = self
                .nodes
                .get(&edge.from)
                .ok_or_else(|| GraphError::MissingNode(edge.from.clone()))?;
            let to = self
                .nodes
                .get(&edge.to)
                .ok_or_else(|| GraphError::MissingNode(edge.to.clone()))?;
            if (from.kind, to.kind) != edge.kind.endpoints() {
                return Err(GraphError::SchemaViolation {
                    edge: edge.kind,
                    from: edge.from,
                    from_kind: from.kind,
                    to: edge.to,
                    to_kind: to.kind,
                });
            }
        }
        let inc_total: usize = self.inc.values().map(BTreeSet::len).sum();
        if inc_total != self.edge_count {
            return Err(GraphError::Format(format!(
                "adjacency out of sync: {} incoming vs {} edges",
                inc_total, self.edge_count
            )));
        }
        Ok(())
    }
}

fn prune(adj: &mut Adjacency, key: &str) {
    if adj.get(key).is_some_and(BTreeSet::is_empty) {
        adj.remove(key);
    }
}
