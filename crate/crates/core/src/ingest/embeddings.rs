use std::collections::{HashMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{read_file, IngestError, PublicationRecord};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmbeddingRecord {
    pub id: String,
    pub vector: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Embeddings {
    pub dim: usize,
    pub records: Vec<EmbeddingRecord>,
}

#[derive(Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct Header {
    dim: usize,
}

impl Embeddings {
    pub fn to_jsonl(&self) -> String {
        let mut out = serde_json::to_string(&Header { dim: self.dim }).expect("header");
        out.push('\n');
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("embedding serializes"));
            out.push('\n');
        }
        out
    }
}

pub fn load_embeddings(path: impl AsRef<Path>) -> Result<Embeddings, IngestError> {
    parse_embeddings(&read_file(path.as_ref())?)
}

pub fn parse_embeddings(text: &str) -> Result<Embeddings, IngestError> {
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());
    let (_, header_line) = lines
        .next()
        .ok_or_else(|| IngestError::Header("missing header line".into()))?;
    let header: Header = serde_json::from_str(header_line)
        .map_err(|e| IngestError::Header(format!("expected {{\"dim\": D}}: {e}")))?;
    if header.dim == 0 {
        return Err(IngestError::Header("dim must be positive".into()));
    }
    let mut seen = HashSet::new();
    let mut records = Vec::new();
    for (idx, raw) in lines {
        let record: EmbeddingRecord =
            serde_json::from_str(raw).map_err(|e| IngestError::Parse {
                line: idx + 1,
                message: e.to_string(),
            })?;
        if record.vector.len() != header.dim {
            return Err(IngestError::Dimension {
                id: record.id,
                expected: header.dim,
                found: record.vector.len(),
            });
        }
        if record.vector.iter().any(|v| !v.is_finite()) {
            return Err(IngestError::NonFinite { id: record.id });
        }
        if record.vector.iter().all(|&v| v == 0.0) {
            return Err(IngestError::ZeroVector { id: record.id });
        }
        if !seen.insert(record.id.clone()) {
            return Err(IngestError::DuplicateEmbedding { id: record.id });
        }
        records.push(record);
    }
    Ok(Embeddings {
        dim: header.dim,
        records,
    })
}

/// Every embedding must name exactly one publication.
pub fn check_alignment(
    publications: &[PublicationRecord],
    embeddings: &Embeddings,
) -> Result<(), IngestError> {
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for p in publications {
        *counts.entry(p.id.as_str()).or_default() += 1;
    }
    for e in &embeddings.records {
        if counts.get(e.id.as_str()).copied() != Some(1) {
            return Err(IngestError::OrphanEmbedding { id: e.id.clone() });
        }
    }
    Ok(())
}
