//! Corpus ingest: publications, taxonomy and embedding files, plus
//! best-effort metadata enrichment.
//!
//! File formats:
//!
//! * `publications.jsonl`: one [`PublicationRecord`] object per line.
//! * `taxonomy.json`: `{"entries": [TaxonomyEntry, ...]}`.
//! * `embeddings.jsonl`: header line `{"dim": D}`, then
//!   `{"id": ..., "vector": [...]}` per line.

mod corpus;
mod embeddings;
mod enrich;
mod taxonomy;

use std::path::PathBuf;

use thiserror::Error;

pub use corpus::{
    load_corpus, parse_corpus, to_jsonl, validate_topic_refs, write_corpus, PublicationRecord,
};
pub use embeddings::{
    check_alignment, load_embeddings, parse_embeddings, EmbeddingRecord, Embeddings,
};
pub use enrich::{
    enrich, enrich_all, EnrichStatus, MetadataProvider, PaperMetadata, RecordedMetadata,
};
pub use taxonomy::{load_taxonomy, Taxonomy, TaxonomyEntry, TopicLevel};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: malformed JSON: {message}")]
    Parse { line: usize, message: String },
    #[error("duplicate publication id {id:?} on lines {first} and {second}")]
    DuplicateId {
        id: String,
        first: usize,
        second: usize,
    },
    #[error("line {line}: invalid record {id:?}: {reason}")]
    InvalidRecord {
        line: usize,
        id: String,
        reason: String,
    },
    #[error("unresolved topic ids: {}", format_offenders(.0))]
    UnresolvedTopics(Vec<(String, String)>),
    #[error("taxonomy structure error: {0}")]
    Structure(String),
    #[error("embeddings header: {0}")]
    Header(String),
    #[error("embedding {id:?} has dimension {found}, expected {expected}")]
    Dimension {
        id: String,
        expected: usize,
        found: usize,
    },
    #[error("embedding {id:?} contains non-finite values")]
    NonFinite { id: String },
    #[error("embedding {id:?} is the zero vector")]
    ZeroVector { id: String },
    #[error("duplicate embedding id {id:?}")]
    DuplicateEmbedding { id: String },
    #[error("embedding {id:?} has no matching publication")]
    OrphanEmbedding { id: String },
}

fn format_offenders(offenders: &[(String, String)]) -> String {
    offenders
        .iter()
        .map(|(record, topic)| format!("{record} -> {topic}"))
        .collect::<Vec<_>>()
        .join(", ")
}

fn read_file(path: &std::path::Path) -> Result<String, IngestError> {
    std::fs::read_to_string(path).map_err(|source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    })
}
