//! The on-disk build artifact shared by the CLI stages and the server.
//!
//! A snapshot is a directory:
//!
//! | file                  | written by            |
//! |-----------------------|-----------------------|
//! | `publications.jsonl`  | ingest                |
//! | `taxonomy.json`       | ingest                |
//! | `vectors.bin`         | ingest                |
//! | `clusters.json`       | cluster, name-clusters|
//! | `segments.json`       | segment               |
//! | `graph.snapshot.json` | every stage           |
//!
//! The graph file is derived: it is regenerated from the others on every
//! save, so cluster nodes in it always match `clusters.json`. Every file is
//! written in a canonical order, which makes two builds from the same inputs
//! byte-identical.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use thiserror::Error;

use crate::classify::{ClassifierConfig, KeywordProjectionEncoder, QueryEncoder, TopicProvider};
use crate::cluster::{
    build_all, check_hierarchy, dedup_names, llm_rename, name_clusters, ClusterError, ClusterNode,
    ClusteringParams, IdfScope, RenameOutcome, TopicMembers,
};
use crate::dialogue::Engine;
use crate::graph::{
    attach_clusters, build_graph, detach_clusters, GraphDocument, GraphError, ScholarGraph,
};
use crate::index::{to_storage_precision, IndexError, VectorIndex};
use crate::ingest::{
    check_alignment, parse_corpus, to_jsonl, validate_topic_refs, Embeddings, IngestError,
    PublicationRecord, Taxonomy, TopicLevel,
};
use crate::llm::{CompareMode, TextGenerator};
use crate::segment::{
    extract_sections, label_via_provider, segment_abstract, split_sentences, LabeledSentence,
    Sections, SegmentError, SentenceLabeler,
};

pub const PUBLICATIONS_FILE: &str = "publications.jsonl";
pub const TAXONOMY_FILE: &str = "taxonomy.json";
pub const VECTORS_FILE: &str = "vectors.bin";
pub const CLUSTERS_FILE: &str = "clusters.json";
pub const SEGMENTS_FILE: &str = "segments.json";
pub const GRAPH_FILE: &str = "graph.snapshot.json";

#[derive(Debug, Error)]
pub enum SnapshotError {
    #[error("{}: {message}", path.display())]
    Io { path: PathBuf, message: String },
    #[error("{}: {message}", path.display())]
    Format { path: PathBuf, message: String },
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Index(#[from] IndexError),
    #[error(transparent)]
    Cluster(#[from] ClusterError),
    #[error(transparent)]
    Segment(#[from] SegmentError),
    #[error("snapshot has no clusters; run the cluster stage first")]
    Unclustered,
    #[error("publication {0:?} has no embedding")]
    MissingEmbedding(String),
}

fn io_err(path: &Path) -> impl Fn(io::Error) -> SnapshotError + '_ {
    move |e| SnapshotError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

fn read(path: &Path) -> Result<String, SnapshotError> {
    fs::read_to_string(path).map_err(io_err(path))
}

/// Parses `path`, or returns the default when the stage that writes it has
/// not run yet.
fn read_optional_json<T: DeserializeOwned + Default>(path: &Path) -> Result<T, SnapshotError> {
    if !path.exists() {
        return Ok(T::default());
    }
    serde_json::from_str(&read(path)?).map_err(|e| SnapshotError::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

fn to_pretty<T: serde::Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("snapshot parts serialize");
    s.push('\n');
    s
}

/// Everything the offline stages produce.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub records: Vec<PublicationRecord>,
    pub taxonomy: Taxonomy,
    pub index: VectorIndex<f64>,
    /// Sorted by topic, then id.
    pub clusters: Vec<ClusterNode>,
    pub segments: BTreeMap<String, Vec<LabeledSentence>>,
    pub graph: ScholarGraph,
}

impl Snapshot {
    /// Validates and joins the three ingest inputs. Records are kept in id
    /// order and every record must have an embedding.
    pub fn build(
        mut records: Vec<PublicationRecord>,
        taxonomy: Taxonomy,
        embeddings: &Embeddings,
    ) -> Result<Self, SnapshotError> {
        validate_topic_refs(&records, &taxonomy)?;
        check_alignment(&records, embeddings)?;
        records.sort_by(|a, b| a.id.cmp(&b.id));
        let vectors: HashMap<&str, &Vec<f64>> = embeddings
            .records
            .iter()
            .map(|e| (e.id.as_str(), &e.vector))
            .collect();
        let mut index = VectorIndex::new(embeddings.dim);
        for r in &records {
            let v = vectors
                .get(r.id.as_str())
                .ok_or_else(|| SnapshotError::MissingEmbedding(r.id.clone()))?;
            index.insert(&r.id, &to_storage_precision(v))?;
        }
        let graph = build_graph(&records, &taxonomy)?;
        Ok(Snapshot {
            records,
            taxonomy,
            index,
            clusters: Vec::new(),
            segments: BTreeMap::new(),
            graph,
        })
    }

    pub fn dim(&self) -> usize {
        self.index.dim()
    }

    pub fn record(&self, id: &str) -> Option<&PublicationRecord> {
        self.records
            .binary_search_by(|r| r.id.as_str().cmp(id))
            .ok()
            .map(|i| &self.records[i])
    }

    fn titles(&self) -> HashMap<String, String> {
        self.records
            .iter()
            .map(|r| (r.id.clone(), r.title.clone()))
            .collect()
    }

    /// Rebuilds the cluster layer of the graph from `clusters`.
    fn refresh_graph(&mut self) -> Result<(), SnapshotError> {
        detach_clusters(&mut self.graph);
        attach_clusters(&mut self.graph, &self.clusters)?;
        Ok(())
    }

    /// Builds the cluster tree of every subtopic that has publications and
    /// names it with sibling-scope tf·idf.
    pub fn cluster(&mut self, params: &ClusteringParams) -> Result<(), SnapshotError> {
        params.validate()?;
        let topics: Vec<TopicMembers<f64>> = self
            .taxonomy
            .at_level(TopicLevel::Sub)
            .map(|t| {
                let members = self
                    .records
                    .iter()
                    .filter(|r| r.topic_ids.contains(&t.id))
                    .map(|r| {
                        let v = self.index.get(&r.id).expect("every record is indexed");
                        (r.id.clone(), v.to_vec())
                    })
                    .collect::<Vec<_>>();
                (t.id.clone(), members)
            })
            .filter(|(_, m)| !m.is_empty())
            .collect();
        let mut nodes = build_all(&topics, params)?;
        check_hierarchy(&nodes, params.leaf_max)?;
        name_clusters(&mut nodes, &self.titles(), IdfScope::Siblings);
        dedup_names(&mut nodes);
        nodes.sort_by(|a, b| (&a.topic_id, &a.id).cmp(&(&b.topic_id, &b.id)));
        self.clusters = nodes;
        self.refresh_graph()
    }

    /// Recomputes tf·idf names and makes them unique per topic.
    pub fn name_clusters(&mut self, scope: IdfScope) -> Result<(), SnapshotError> {
        if self.clusters.is_empty() {
            return Err(SnapshotError::Unclustered);
        }
        let titles = self.titles();
        name_clusters(&mut self.clusters, &titles, scope);
        dedup_names(&mut self.clusters);
        self.refresh_graph()
    }

    /// Asks `backend` for a friendlier name for every cluster, in id order.
    /// Rejected or failed answers leave the tf·idf name in place.
    pub fn rename_with_llm(
        &mut self,
        backend: &dyn TextGenerator,
        seed: u64,
    ) -> Result<Vec<(String, RenameOutcome)>, SnapshotError> {
        if self.clusters.is_empty() {
            return Err(SnapshotError::Unclustered);
        }
        let titles = self.titles();
        let mut outcomes = Vec::with_capacity(self.clusters.len());
        for i in 0..self.clusters.len() {
            let node = &self.clusters[i];
            let taken: BTreeSet<String> = self
                .clusters
                .iter()
                .filter(|c| c.topic_id == node.topic_id && c.id != node.id)
                .map(|c| c.display_name.clone())
                .collect();
            let member_titles: Vec<&str> = node
                .member_ids
                .iter()
                .filter_map(|m| titles.get(m).map(String::as_str))
                .collect();
            let outcome = llm_rename(node, &member_titles, backend, seed, &taken);
            if let RenameOutcome::Renamed(name) = &outcome {
                self.clusters[i].display_name = name.clone();
            }
            outcomes.push((self.clusters[i].id.clone(), outcome));
        }
        self.refresh_graph()?;
        Ok(outcomes)
    }

    /// Labels every abstract, through `labeler` when given.
    pub fn segment(&mut self, labeler: Option<&dyn SentenceLabeler>) -> Result<(), SnapshotError> {
        let mut segments = BTreeMap::new();
        for r in &self.records {
            let labeled = match labeler {
                Some(l) => label_via_provider(&split_sentences(&r.abstract_text), l)?,
                None => segment_abstract(&r.abstract_text),
            };
            segments.insert(r.id.clone(), labeled);
        }
        self.segments = segments;
        Ok(())
    }

    /// Objective and result sections of every segmented abstract.
    pub fn sections(&self) -> BTreeMap<String, Sections> {
        self.segments
            .iter()
            .map(|(id, labeled)| (id.clone(), extract_sections(labeled)))
            .collect()
    }

    /// Writes every part into `dir`, creating it if needed.
    pub fn save(&self, dir: &Path) -> Result<(), SnapshotError> {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        let write = |name: &str, body: String| {
            let path = dir.join(name);
            fs::write(&path, body).map_err(io_err(&path))
        };
        write(PUBLICATIONS_FILE, to_jsonl(&self.records))?;
        write(TAXONOMY_FILE, self.taxonomy.to_json())?;
        write(CLUSTERS_FILE, to_pretty(&self.clusters))?;
        write(SEGMENTS_FILE, to_pretty(&self.segments))?;
        write(
            GRAPH_FILE,
            GraphDocument::from_graph(&self.graph, self.dim()).to_json(),
        )?;
        self.index.save(dir.join(VECTORS_FILE))?;
        Ok(())
    }

    /// Loads a snapshot written by [`Snapshot::save`]. The graph is rebuilt
    /// from the other parts and must equal the stored one.
    pub fn load(dir: &Path) -> Result<Self, SnapshotError> {
        let path = dir.join(PUBLICATIONS_FILE);
        let records = parse_corpus(&read(&path)?)?;
        let taxonomy = crate::ingest::load_taxonomy(dir.join(TAXONOMY_FILE))?;
        let index = VectorIndex::load(dir.join(VECTORS_FILE))?;
        let clusters: Vec<ClusterNode> = read_optional_json(&dir.join(CLUSTERS_FILE))?;
        let segments: BTreeMap<String, Vec<LabeledSentence>> =
            read_optional_json(&dir.join(SEGMENTS_FILE))?;
        for r in &records {
            if !index.contains(&r.id) {
                return Err(SnapshotError::MissingEmbedding(r.id.clone()));
            }
        }
        let mut graph = build_graph(&records, &taxonomy)?;
        attach_clusters(&mut graph, &clusters)?;
        let graph_path = dir.join(GRAPH_FILE);
        let stored = GraphDocument::from_json(&read(&graph_path)?)?;
        if stored.dim != index.dim() {
            return Err(SnapshotError::Format {
                path: graph_path,
                message: format!(
                    "graph header dim {} differs from vectors dim {}",
                    stored.dim,
                    index.dim()
                ),
            });
        }
        if stored.into_graph()? != graph {
            return Err(SnapshotError::Format {
                path: graph_path,
                message: "graph does not match publications, taxonomy and clusters".into(),
            });
        }
        Ok(Snapshot {
            records,
            taxonomy,
            index,
            clusters,
            segments,
            graph,
        })
    }

    /// Offline query encoder over titles and abstracts.
    pub fn keyword_encoder(&self) -> KeywordProjectionEncoder {
        let texts: Vec<String> = self
            .records
            .iter()
            .map(|r| format!("{} {}", r.title, r.abstract_text))
            .collect();
        KeywordProjectionEncoder::new(
            self.records
                .iter()
                .zip(&texts)
                .map(|(r, t)| (r.id.as_str(), t.as_str())),
            &self.index,
            KeywordProjectionEncoder::DEFAULT_TOP_M,
        )
    }
}

/// Optional pieces of an [`Engine`]; `None` picks the offline default.
pub struct EngineParts {
    pub encoder: Option<Box<dyn QueryEncoder>>,
    pub topic_provider: Option<Box<dyn TopicProvider>>,
    pub classifier: ClassifierConfig,
    pub llm: Box<dyn TextGenerator>,
    pub compare_mode: CompareMode,
}

impl Snapshot {
    /// Turns the snapshot into the read-only serving state.
    pub fn into_engine(self, parts: EngineParts) -> Engine {
        let encoder = parts
            .encoder
            .unwrap_or_else(|| Box::new(self.keyword_encoder()));
        let sections = self.sections();
        Engine {
            graph: self.graph,
            index: self.index,
            taxonomy: self.taxonomy,
            encoder,
            topic_provider: parts.topic_provider,
            classifier: parts.classifier,
            sections,
            llm: parts.llm,
            compare_mode: parts.compare_mode,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{desk_fixture, DESK_SEED};

    fn desk() -> Snapshot {
        let f = desk_fixture(DESK_SEED);
        let mut s = Snapshot::build(f.records, f.taxonomy, &f.embeddings).unwrap();
        s.cluster(&ClusteringParams::default()).unwrap();
        s.segment(None).unwrap();
        s
    }

    fn dir_bytes(dir: &Path) -> BTreeMap<String, Vec<u8>> {
        fs::read_dir(dir)
            .unwrap()
            .map(|e| {
                let e = e.unwrap();
                (
                    e.file_name().to_string_lossy().into_owned(),
                    fs::read(e.path()).unwrap(),
                )
            })
            .collect()
    }

    #[test]
    fn save_load_round_trip_is_byte_stable() {
        let s = desk();
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        s.save(a.path()).unwrap();
        let loaded = Snapshot::load(a.path()).unwrap();
        assert_eq!(loaded.graph, s.graph);
        assert_eq!(loaded.clusters, s.clusters);
        assert_eq!(loaded.segments, s.segments);
        loaded.save(b.path()).unwrap();
        assert_eq!(dir_bytes(a.path()), dir_bytes(b.path()));
    }

    #[test]
    fn tampered_graph_is_rejected() {
        let s = desk();
        let dir = tempfile::tempdir().unwrap();
        s.save(dir.path()).unwrap();
        let mut clusters = s.clusters.clone();
        clusters[0].display_name = "something else".into();
        fs::write(dir.path().join(CLUSTERS_FILE), to_pretty(&clusters)).unwrap();
        assert!(matches!(
            Snapshot::load(dir.path()),
            Err(SnapshotError::Format { .. })
        ));
    }

    #[test]
    fn naming_requires_clusters() {
        let f = desk_fixture(DESK_SEED);
        let mut s = Snapshot::build(f.records, f.taxonomy, &f.embeddings).unwrap();
        assert!(matches!(
            s.name_clusters(IdfScope::Siblings),
            Err(SnapshotError::Unclustered)
        ));
    }
}
