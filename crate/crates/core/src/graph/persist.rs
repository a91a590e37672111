use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Edge, GraphError, Node, ScholarGraph};

pub const SCHEMA_VERSION: u32 = 1;

/// On-disk form of the graph. `schema_version` and `dim` come first so the
/// header is readable without parsing the body.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphDocument {
    pub schema_version: u32,
    pub dim: usize,
    pub nodes: Vec<Node>,
    pub edges: Vec<Edge>,
}

impl GraphDocument {
    pub fn from_graph(graph: &ScholarGraph, dim: usize) -> Self {
        GraphDocument {
            schema_version: SCHEMA_VERSION,
            dim,
            nodes: graph.nodes().cloned().collect(),
            edges: graph.edges().collect(),
        }
    }

    pub fn into_graph(self) -> Result<ScholarGraph, GraphError> {
        let mut g = ScholarGraph::new();
        for n in self.nodes {
            g.add_node(n)?;
        }
        for e in self.edges {
            g.add_edge(&e.from, &e.to, e.kind)?;
        }
        Ok(g)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("graph serializes");
        s.push('\n');
        s
    }

    /// Checks the header before materializing anything.
    pub fn from_json(text: &str) -> Result<Self, GraphError> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| GraphError::Format(e.to_string()))?;
        let version = value
            .get("schema_version")
            .and_then(serde_json::Value::as_u64)
            .ok_or_else(|| GraphError::Format("missing schema_version header".into()))?;
        if version != u64::from(SCHEMA_VERSION) {
            return Err(GraphError::VersionMismatch {
                found: version.try_into().unwrap_or(u32::MAX),
                expected: SCHEMA_VERSION,
            });
        }
        serde_json::from_value(value).map_err(|e| GraphError::Format(e.to_string()))
    }
}

/// Writes the graph to `path`; returns the embedding dimension recorded.
pub fn persist(graph: &ScholarGraph, dim: usize, path: impl AsRef<Path>) -> Result<(), GraphError> {
    let path = path.as_ref();
    std::fs::write(path, GraphDocument::from_graph(graph, dim).to_json()).map_err(|e| {
        GraphError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        }
    })
}

/// Loads a graph written by [`persist`], returning it with its `dim`.
pub fn load_graph(path: impl AsRef<Path>) -> Result<(ScholarGraph, usize), GraphError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| GraphError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    let doc = GraphDocument::from_json(&text)?;
    let dim = doc.dim;
    Ok((doc.into_graph()?, dim))
}
