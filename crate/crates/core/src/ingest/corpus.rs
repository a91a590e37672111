use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{read_file, IngestError, Taxonomy};

/// Earliest publication year accepted.
pub const MIN_YEAR: i32 = 1950;

/// One publication line of `publications.jsonl`.
///
/// `title`, `abstract` and `year` are mandatory; every other field defaults
/// to empty.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PublicationRecord {
    pub id: String,
    pub title: String,
    #[serde(rename = "abstract")]
    pub abstract_text: String,
    pub year: i32,
    #[serde(default)]
    pub venue: String,
    #[serde(default)]
    pub authors: Vec<String>,
    #[serde(default)]
    pub urls: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tldr: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub citation_count: Option<u64>,
    #[serde(default)]
    pub is_survey: bool,
    #[serde(default)]
    pub topic_ids: Vec<String>,
    #[serde(default)]
    pub references: Vec<String>,
}

impl PublicationRecord {
    /// Checks the per-record invariants, returning the reason on failure.
    pub fn check(&self) -> Result<(), String> {
        if self.id.trim().is_empty() {
            return Err("empty id".into());
        }
        if self.title.trim().is_empty() {
            return Err("empty title".into());
        }
        if self.abstract_text.trim().is_empty() {
            return Err("empty abstract".into());
        }
        if self.year < MIN_YEAR {
            return Err(format!("year {} before {MIN_YEAR}", self.year));
        }
        if self.references.iter().any(|r| r == &self.id) {
            return Err("references itself".into());
        }
        Ok(())
    }
}

pub fn load_corpus(path: impl AsRef<Path>) -> Result<Vec<PublicationRecord>, IngestError> {
    parse_corpus(&read_file(path.as_ref())?)
}

/// Parses JSON Lines text. Blank lines are skipped; line numbers in errors
/// are 1-based physical lines.
pub fn parse_corpus(text: &str) -> Result<Vec<PublicationRecord>, IngestError> {
    let mut records = Vec::new();
    let mut seen: HashMap<String, usize> = HashMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let record: PublicationRecord =
            serde_json::from_str(raw).map_err(|e| IngestError::Parse {
                line,
                message: e.to_string(),
            })?;
        record
            .check()
            .map_err(|reason| IngestError::InvalidRecord {
                line,
                id: record.id.clone(),
                reason,
            })?;
        if let Some(&first) = seen.get(&record.id) {
            return Err(IngestError::DuplicateId {
                id: record.id,
                first,
                second: line,
            });
        }
        seen.insert(record.id.clone(), line);
        records.push(record);
    }
    Ok(records)
}

/// Fails with every `(record id, topic id)` pair whose topic is not in the
/// taxonomy.
pub fn validate_topic_refs(
    records: &[PublicationRecord],
    taxonomy: &Taxonomy,
) -> Result<(), IngestError> {
    let offenders: Vec<(String, String)> = records
        .iter()
        .flat_map(|r| {
            r.topic_ids
                .iter()
                .filter(|t| taxonomy.get(t).is_none())
                .map(|t| (r.id.clone(), t.clone()))
        })
        .collect();
    if offenders.is_empty() {
        Ok(())
    } else {
        Err(IngestError::UnresolvedTopics(offenders))
    }
}

/// Serializes records as JSON Lines, one trailing newline per record.
pub fn to_jsonl(records: &[PublicationRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("records always serialize"));
        out.push('\n');
    }
    out
}

pub fn write_corpus(records: &[PublicationRecord], path: impl AsRef<Path>) -> std::io::Result<()> {
    std::fs::write(path, to_jsonl(records))
}
