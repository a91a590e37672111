use std::collections::BTreeSet;

use super::{EdgeKind, GraphError, Node, NodeKind, ScholarGraph};
use crate::cluster::ClusterNode;
use crate::ingest::{PublicationRecord, Taxonomy};

pub fn author_id(name: &str) -> String {
    format!("author:{name}")
}

pub fn venue_id(name: &str) -> String {
    format!("venue:{name}")
}

/// Builds the publication/topic layer of the graph.
///
/// Authors and venues are deduplicated by exact name. Citations are kept only
/// when the cited paper is part of the corpus.
pub fn build_graph(
    records: &[PublicationRecord],
    taxonomy: &Taxonomy,
) -> Result<ScholarGraph, GraphError> {
    let mut g = ScholarGraph::new();
    for entry in taxonomy.entries() {
        g.add_node(
            Node::new(&entry.id, NodeKind::Topic)
                .with("name", entry.name.as_str())
                .with("definition", entry.definition.as_str())
                .with("level", entry.level.as_str()),
        )?;
    }
    for entry in taxonomy.entries() {
        if let Some(parent) = &entry.parent_id {
            g.add_edge(&entry.id, parent, EdgeKind::SubtopicOf)?;
        }
    }

    let mut authors = BTreeSet::new();
    let mut venues = BTreeSet::new();
    for r in records {
        authors.extend(r.authors.iter().filter(|a| !a.trim().is_empty()));
        if !r.venue.trim().is_empty() {
            venues.insert(&r.venue);
        }
    }
    for a in authors {
        g.add_node(Node::new(author_id(a), NodeKind::Author).with("name", a.as_str()))?;
    }
    for v in venues {
        g.add_node(Node::new(venue_id(v), NodeKind::Venue).with("name", v.as_str()))?;
    }

    for r in records {
        let mut node = Node::new(&r.id, NodeKind::Publication)
            .with("title", r.title.as_str())
            .with("abstract", r.abstract_text.as_str())
            .with("year", i64::from(r.year))
            .with("is_survey", r.is_survey);
        if !r.venue.is_empty() {
            node = node.with("venue", r.venue.as_str());
        }
        if let Some(t) = &r.tldr {
            node = node.with("tldr", t.as_str());
        }
        if let Some(c) = r.citation_count {
            node = node.with("citation_count", c as i64);
        }
        if let Some(u) = r.urls.first() {
            node = node.with("url", u.as_str());
        }
        g.add_node(node)?;
    }

    for r in records {
        for a in r.authors.iter().filter(|a| !a.trim().is_empty()) {
            g.add_edge(&r.id, &author_id(a), EdgeKind::AuthoredBy)?;
        }
        if !r.venue.trim().is_empty() {
            g.add_edge(&r.id, &venue_id(&r.venue), EdgeKind::PublishedIn)?;
        }
        for t in &r.topic_ids {
            g.add_edge(&r.id, t, EdgeKind::HasTopic)?;
        }
        for cited in &r.references {
            if g.contains(cited) {
                g.add_edge(&r.id, cited, EdgeKind::Cites)?;
            }
        }
    }
    Ok(g)
}

/// Adds cluster nodes and their edges. A paper gets an `IN_CLUSTER` edge to
/// every cluster on its path, not only its leaf.
pub fn attach_clusters(g: &mut ScholarGraph, clusters: &[ClusterNode]) -> Result<(), GraphError> {
    for c in clusters {
        g.add_node(
            Node::new(&c.id, NodeKind::Cluster)
                .with("name", c.display_name.as_str())
                .with("tfidf_name", c.tfidf_name.as_str())
                .with("topic_id", c.topic_id.as_str())
                .with("depth", c.depth as i64)
                .with("size", c.member_ids.len() as i64)
                .with("leaf", c.leaf)
                .with("unsplittable", c.unsplittable),
        )?;
    }
    for c in clusters {
        match &c.parent_id {
            Some(parent) => {
                g.add_edge(&c.id, parent, EdgeKind::ChildClusterOf)?;
            }
            None => {
                g.add_edge(&c.id, &c.topic_id, EdgeKind::ClusterOfTopic)?;
            }
        }
        for m in &c.member_ids {
            g.add_edge(m, &c.id, EdgeKind::InCluster)?;
        }
    }
    Ok(())
}

/// Removes every cluster node (and thereby every cluster edge).
pub fn detach_clusters(g: &mut ScholarGraph) {
    let ids: Vec<String> = g
        .nodes_of(NodeKind::Cluster)
        .map(|n| n.id.clone())
        .collect();
    for id in ids {
        g.remove_node(&id);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{TaxonomyEntry, TopicLevel};

    fn taxonomy() -> Taxonomy {
        Taxonomy::new(vec![TaxonomyEntry {
            id: "m".into(),
            name: "Main".into(),
            definition: "d".into(),
            level: TopicLevel::Main,
            parent_id: None,
        }])
        .unwrap()
    }

    fn record(id: &str, authors: &[&str]) -> PublicationRecord {
        PublicationRecord {
            id: id.into(),
            title: format!("T {id}"),
            abstract_text: "A.".into(),
            year: 2020,
            venue: "ACL".into(),
            authors: authors.iter().map(|s| s.to_string()).collect(),
            urls: vec![],
            tldr: None,
            citation_count: None,
            is_survey: false,
            topic_ids: vec!["m".into()],
            references: vec![],
        }
    }

    #[test]
    fn single_record_counts() {
        let g = build_graph(&[record("p", &["X", "Y"])], &taxonomy()).unwrap();
        assert_eq!(g.node_count(), 5);
        assert_eq!(g.edge_count(), 4);
        assert_eq!(g.count_edges(EdgeKind::AuthoredBy), 2);
        assert_eq!(g.count_edges(EdgeKind::PublishedIn), 1);
        assert_eq!(g.count_edges(EdgeKind::HasTopic), 1);
    }

    #[test]
    fn shared_author_deduplicated() {
        let g = build_graph(
            &[record("p1", &["A. B."]), record("p2", &["A. B."])],
            &taxonomy(),
        )
        .unwrap();
        assert_eq!(g.count_nodes(NodeKind::Author), 1);
        assert_eq!(
            g.in_neighbors(&author_id("A. B."), EdgeKind::AuthoredBy)
                .count(),
            2
        );
    }

    #[test]
    fn external_citations_dropped() {
        let mut a = record("p1", &[]);
        a.references = vec!["p2".into(), "elsewhere".into()];
        let g = build_graph(&[a, record("p2", &[])], &taxonomy()).unwrap();
        assert_eq!(g.count_edges(EdgeKind::Cites), 1);
    }

    #[test]
    fn unknown_topic_is_build_error() {
        let mut a = record("p1", &[]);
        a.topic_ids = vec!["nope".into()];
        let err = build_graph(&[a], &taxonomy()).unwrap_err();
        assert!(err.to_string().contains("nope"));
    }
}
