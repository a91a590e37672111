use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use super::{EdgeKind, GraphError, NodeKind, PropValue, ScholarGraph};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Out,
    In,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Parameter {
    pub name: &'static str,
    pub kind: NodeKind,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Hop {
    pub edge: EdgeKind,
    pub dir: Direction,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Filter {
    PropEquals {
        key: &'static str,
        value: PropValue,
    },
    /// Keeps nodes with an `edge` link (in `dir`) to the node bound to `param`.
    LinkedTo {
        edge: EdgeKind,
        dir: Direction,
        param: &'static str,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Selector {
    Id,
    Prop {
        key: &'static str,
    },
    /// Names of nodes reached over one edge, joined with "; ".
    Related {
        column: &'static str,
        edge: EdgeKind,
        dir: Direction,
    },
}

impl Selector {
    pub fn column(&self) -> &'static str {
        match self {
            Selector::Id => "id",
            Selector::Prop { key } => key,
            Selector::Related { column, .. } => column,
        }
    }
}

/// A named, parameterized retrieval: start at a bound node, follow `hops`,
/// keep nodes passing every filter, project the selected columns.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QueryTemplate {
    pub name: &'static str,
    pub description: &'static str,
    pub parameters: Vec<Parameter>,
    pub start: &'static str,
    pub hops: Vec<Hop>,
    pub filters: Vec<Filter>,
    pub select: Vec<Selector>,
}

impl QueryTemplate {
    /// Every declared parameter is referenced by the body and vice versa.
    pub fn validate(&self) -> Result<(), GraphError> {
        let invalid = |reason: String| GraphError::InvalidTemplate {
            name: self.name.to_string(),
            reason,
        };
        let declared: BTreeSet<&str> = self.parameters.iter().map(|p| p.name).collect();
        if declared.len() != self.parameters.len() {
            return Err(invalid("duplicate parameter".into()));
        }
        let mut used: BTreeSet<&str> = BTreeSet::from([self.start]);
        for f in &self.filters {
            if let Filter::LinkedTo { param, .. } = f {
                used.insert(param);
            }
        }
        if let Some(p) = used.difference(&declared).next() {
            return Err(invalid(format!("references undeclared parameter {p:?}")));
        }
        if let Some(p) = declared.difference(&used).next() {
            return Err(invalid(format!("parameter {p:?} is never referenced")));
        }
        if self.select.is_empty() {
            return Err(invalid("empty selection".into()));
        }
        Ok(())
    }
}

/// One result row: column name to value. Absent properties are omitted.
pub type Row = BTreeMap<String, PropValue>;

/// Runs `template` with `bindings` (parameter name to node id).
///
/// Rows are ordered by the id of the node they describe.
pub fn run_template(
    graph: &ScholarGraph,
    template: &QueryTemplate,
    bindings: &BTreeMap<String, String>,
) -> Result<Vec<Row>, GraphError> {
    template.validate()?;
    for name in bindings.keys() {
        if !template.parameters.iter().any(|p| p.name == name) {
            return Err(GraphError::UnknownParameter(name.clone()));
        }
    }
    for p in &template.parameters {
        let id = bindings
            .get(p.name)
            .ok_or_else(|| GraphError::UnboundParameter(p.name.to_string()))?;
        let node = graph
            .node(id)
            .ok_or_else(|| GraphError::MissingNode(id.clone()))?;
        if node.kind != p.kind {
            return Err(GraphError::KindMismatch {
                param: p.name.to_string(),
                expected: p.kind,
                found: node.kind,
                id: id.clone(),
            });
        }
    }

    let mut frontier: BTreeSet<&str> = BTreeSet::from([bindings[template.start].as_str()]);
    for hop in &template.hops {
        frontier = frontier
            .iter()
            .flat_map(|id| graph.neighbors(id, hop.edge, hop.dir))
            .collect();
    }

    let mut rows = Vec::new();
    'nodes: for id in frontier {
        let node = graph.node(id).expect("neighbors exist");
        for f in &template.filters {
            let keep = match f {
                Filter::PropEquals { key, value } => node.prop(key) == Some(value),
                Filter::LinkedTo { edge, dir, param } => {
                    let target = bindings[*param].as_str();
                    graph.neighbors(id, *edge, *dir).any(|n| n == target)
                }
            };
            if !keep {
                continue 'nodes;
            }
        }
        let mut row = Row::new();
        for sel in &template.select {
            let value = match sel {
                Selector::Id => Some(PropValue::from(id)),
                Selector::Prop { key } => node.prop(key).cloned(),
                Selector::Related { edge, dir, .. } => {
                    let names: Vec<&str> = graph
                        .neighbors(id, *edge, *dir)
                        .filter_map(|n| graph.node(n).and_then(|n| n.name()))
                        .collect();
                    (!names.is_empty()).then(|| PropValue::from(names.join("; ")))
                }
            };
            if let Some(v) = value {
                row.insert(sel.column().to_string(), v);
            }
        }
        rows.push(row);
    }
    Ok(rows)
}

fn props(keys: &[&'static str]) -> Vec<Selector> {
    std::iter::once(Selector::Id)
        .chain(keys.iter().map(|&key| Selector::Prop { key }))
        .collect()
}

fn single(name: &'static str, kind: NodeKind) -> Vec<Parameter> {
    vec![Parameter { name, kind }]
}

/// The templates shipped with the engine, in name order.
pub fn builtin_templates() -> Vec<QueryTemplate> {
    let paper_columns = [
        "title",
        "year",
        "venue",
        "tldr",
        "citation_count",
        "is_survey",
    ];
    let mut all = vec![
        QueryTemplate {
            name: "children_of_cluster",
            description: "Direct subclusters of a cluster",
            parameters: single("cluster", NodeKind::Cluster),
            start: "cluster",
            hops: vec![Hop {
                edge: EdgeKind::ChildClusterOf,
                dir: Direction::In,
            }],
            filters: vec![],
            select: props(&["name", "size", "depth", "leaf"]),
        },
        QueryTemplate {
            name: "clusters_of_topic",
            description: "Top-level clusters of a subtopic",
            parameters: single("topic", NodeKind::Topic),
            start: "topic",
            hops: vec![Hop {
                edge: EdgeKind::ClusterOfTopic,
                dir: Direction::In,
            }],
            filters: vec![],
            select: props(&["name", "size", "depth", "leaf"]),
        },
        QueryTemplate {
            name: "definition_of_topic",
            description: "Name and definition of a topic",
            parameters: single("topic", NodeKind::Topic),
            start: "topic",
            hops: vec![],
            filters: vec![],
            select: props(&["name", "definition", "level"]),
        },
        QueryTemplate {
            name: "paper_details",
            description: "Metadata of a single publication",
            parameters: single("paper", NodeKind::Publication),
            start: "paper",
            hops: vec![],
            filters: vec![],
            select: {
                let mut s = props(&[
                    "title",
                    "abstract",
                    "year",
                    "venue",
                    "tldr",
                    "citation_count",
                    "url",
                    "is_survey",
                ]);
                s.push(Selector::Related {
                    column: "authors",
                    edge: EdgeKind::AuthoredBy,
                    dir: Direction::Out,
                });
                s
            },
        },
        QueryTemplate {
            name: "papers_by_author",
            description: "Publications written by an author",
            parameters: single("author", NodeKind::Author),
            start: "author",
            hops: vec![Hop {
                edge: EdgeKind::AuthoredBy,
                dir: Direction::In,
            }],
            filters: vec![],
            select: props(&paper_columns),
        },
        QueryTemplate {
            name: "papers_in_cluster",
            description: "Publications inside a cluster, including its subclusters",
            parameters: single("cluster", NodeKind::Cluster),
            start: "cluster",
            hops: vec![Hop {
                edge: EdgeKind::InCluster,
                dir: Direction::In,
            }],
            filters: vec![],
            select: props(&paper_columns),
        },
        QueryTemplate {
            name: "subtopics_of_main",
            description: "Subtopics of a main topic",
            parameters: single("topic", NodeKind::Topic),
            start: "topic",
            hops: vec![Hop {
                edge: EdgeKind::SubtopicOf,
                dir: Direction::In,
            }],
            filters: vec![],
            select: props(&["name", "definition"]),
        },
        QueryTemplate {
            name: "surveys_in_topic",
            description: "Survey publications tagged with a topic",
            parameters: single("topic", NodeKind::Topic),
            start: "topic",
            hops: vec![Hop {
                edge: EdgeKind::HasTopic,
                dir: Direction::In,
            }],
            filters: vec![Filter::PropEquals {
                key: "is_survey",
                value: PropValue::Bool(true),
            }],
            select: props(&paper_columns),
        },
    ];
    all.sort_by_key(|t| t.name);
    all
}

pub fn builtin_template(name: &str) -> Result<QueryTemplate, GraphError> {
    builtin_templates()
        .into_iter()
        .find(|t| t.name == name)
        .ok_or_else(|| GraphError::UnknownTemplate(name.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Node;

    fn graph() -> ScholarGraph {
        let mut g = ScholarGraph::new();
        let topic = |id: &str, level: &str| {
            Node::new(id, NodeKind::Topic)
                .with("name", format!("Topic {id}"))
                .with("definition", format!("About {id}"))
                .with("level", level)
        };
        g.add_node(topic("m", "main")).unwrap();
        for s in ["s3", "s1", "s2"] {
            g.add_node(topic(s, "sub")).unwrap();
            g.add_edge(s, "m", EdgeKind::SubtopicOf).unwrap();
        }
        for (i, survey) in [(1, true), (2, false), (3, true)] {
            let id = format!("p{i}");
            g.add_node(
                Node::new(&id, NodeKind::Publication)
                    .with("title", format!("Paper {i}"))
                    .with("abstract", "A.")
                    .with("year", 2020i64)
                    .with("is_survey", survey),
            )
            .unwrap();
            g.add_edge(&id, "s1", EdgeKind::HasTopic).unwrap();
        }
        g
    }

    fn bind(k: &str, v: &str) -> BTreeMap<String, String> {
        BTreeMap::from([(k.to_string(), v.to_string())])
    }

    #[test]
    fn builtins_validate() {
        let all = builtin_templates();
        assert_eq!(all.len(), 8);
        for t in &all {
            t.validate().unwrap();
        }
    }

    #[test]
    fn subtopics_in_id_order() {
        let t = builtin_template("subtopics_of_main").unwrap();
        let rows = run_template(&graph(), &t, &bind("topic", "m")).unwrap();
        let ids: Vec<_> = rows.iter().map(|r| r["id"].as_str().unwrap()).collect();
        assert_eq!(ids, ["s1", "s2", "s3"]);
    }

    #[test]
    fn survey_filter() {
        let t = builtin_template("surveys_in_topic").unwrap();
        let rows = run_template(&graph(), &t, &bind("topic", "s1")).unwrap();
        assert_eq!(rows.len(), 2);
        assert!(rows.iter().all(|r| r.get("tldr").is_none()));
    }

    #[test]
    fn binding_errors() {
        let g = graph();
        let t = builtin_template("definition_of_topic").unwrap();
        assert!(matches!(
            run_template(&g, &t, &BTreeMap::new()),
            Err(GraphError::UnboundParameter(_))
        ));
        assert!(matches!(
            run_template(&g, &t, &bind("topic", "p1")),
            Err(GraphError::KindMismatch { .. })
        ));
        let mut extra = bind("topic", "m");
        extra.insert("other".into(), "m".into());
        assert!(matches!(
            run_template(&g, &t, &extra),
            Err(GraphError::UnknownParameter(_))
        ));
    }

    #[test]
    fn unreferenced_parameter_invalid() {
        let mut t = builtin_template("definition_of_topic").unwrap();
        t.parameters.push(Parameter {
            name: "extra",
            kind: NodeKind::Topic,
        });
        assert!(t.validate().is_err());
        let mut t = builtin_template("definition_of_topic").unwrap();
        t.filters.push(Filter::LinkedTo {
            edge: EdgeKind::SubtopicOf,
            dir: Direction::Out,
            param: "ghost",
        });
        assert!(t.validate().is_err());
    }

    #[test]
    fn linked_to_filter() {
        let mut t = builtin_template("subtopics_of_main").unwrap();
        t.filters.push(Filter::LinkedTo {
            edge: EdgeKind::SubtopicOf,
            dir: Direction::Out,
            param: "topic",
        });
        let rows = run_template(&graph(), &t, &bind("topic", "m")).unwrap();
        assert_eq!(rows.len(), 3);
    }

    #[test]
    fn pure() {
        let g = graph();
        let t = builtin_template("surveys_in_topic").unwrap();
        let a = run_template(&g, &t, &bind("topic", "s1")).unwrap();
        let b = run_template(&g, &t, &bind("topic", "s1")).unwrap();
        assert_eq!(a, b);
    }
}
