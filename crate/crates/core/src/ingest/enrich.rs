use std::collections::HashMap;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use tracing::warn;

use super::{read_file, IngestError, PublicationRecord};
use crate::provider::ProviderError;

/// Metadata returned by a provider for one paper.
///
/// Accepts the flat wire shape `{tldr, citationCount, references}` as well as
/// the nested variants (`tldr: {text}`, `references: [{paperId}]`).
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PaperMetadata {
    #[serde(default, deserialize_with = "de_tldr")]
    pub tldr: Option<String>,
    #[serde(default, rename = "citationCount")]
    pub citation_count: Option<i64>,
    #[serde(default, deserialize_with = "de_references")]
    pub references: Option<Vec<String>>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum TldrWire {
    Text(String),
    Object { text: Option<String> },
}

fn de_tldr<'de, D: serde::Deserializer<'de>>(d: D) -> Result<Option<String>, D::Error> {
    Ok(match Option::<TldrWire>::deserialize(d)? {
        None => None,
        Some(TldrWire::Text(t)) => Some(t),
        Some(TldrWire::Object { text }) => text,
    })
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RefWire {
    Id(String),
    Object {
        #[serde(rename = "paperId")]
        paper_id: Option<String>,
    },
}

fn de_references<'de, D: serde::Deserializer<'de>>(d: D) -> Result<Option<Vec<String>>, D::Error> {
    Ok(Option::<Vec<RefWire>>::deserialize(d)?.map(|refs| {
        refs.into_iter()
            .filter_map(|r| match r {
                RefWire::Id(id) => Some(id),
                RefWire::Object { paper_id } => paper_id,
            })
            .collect()
    }))
}

pub trait MetadataProvider: Send + Sync {
    /// `Ok(None)` means the provider does not know the paper (HTTP 404).
    fn fetch(&self, id: &str) -> Result<Option<PaperMetadata>, ProviderError>;
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EnrichStatus {
    Enriched,
    /// Provider answered but had nothing new.
    Unchanged,
    NotFound,
    /// Transport failure or timeout; the record is returned untouched.
    Unavailable(String),
    /// Provider data failed validation; the record is returned untouched.
    Rejected(String),
}

/// Fills `tldr`, `citation_count` and `references` from the provider.
///
/// Never replaces a field with an empty value and never fails: provider
/// problems come back as a status alongside the original record.
pub fn enrich(
    record: &PublicationRecord,
    provider: &dyn MetadataProvider,
) -> (PublicationRecord, EnrichStatus) {
    let meta = match provider.fetch(&record.id) {
        Ok(Some(meta)) => meta,
        Ok(None) | Err(ProviderError::NotFound) => {
            return (record.clone(), EnrichStatus::NotFound);
        }
        Err(e) => {
            warn!(id = %record.id, error = %e, "enrichment skipped");
            return (record.clone(), EnrichStatus::Unavailable(e.to_string()));
        }
    };
    let citation_count = match meta.citation_count {
        Some(c) if c < 0 => {
            let reason = format!("negative citation count {c}");
            warn!(id = %record.id, %reason, "enrichment rejected");
            return (record.clone(), EnrichStatus::Rejected(reason));
        }
        Some(c) => Some(c as u64),
        None => None,
    };

    let mut out = record.clone();
    if let Some(tldr) = meta
        .tldr
        .map(|t| t.trim().to_string())
        .filter(|t| !t.is_empty())
    {
        out.tldr = Some(tldr);
    }
    if citation_count.is_some() {
        out.citation_count = citation_count;
    }
    if let Some(refs) = meta.references {
        let mut cleaned: Vec<String> = Vec::new();
        for r in refs {
            if !r.is_empty() && r != record.id && !cleaned.contains(&r) {
                cleaned.push(r);
            }
        }
        if !cleaned.is_empty() {
            out.references = cleaned;
        }
    }
    let status = if out == *record {
        EnrichStatus::Unchanged
    } else {
        EnrichStatus::Enriched
    };
    (out, status)
}

/// Enriches every record with at most `max_in_flight` provider calls at a
/// time. Output order matches input order.
pub fn enrich_all(
    records: &[PublicationRecord],
    provider: &dyn MetadataProvider,
    max_in_flight: usize,
) -> Vec<(PublicationRecord, EnrichStatus)> {
    let workers = max_in_flight.max(1).min(records.len().max(1));
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<(PublicationRecord, EnrichStatus)>>> =
        Mutex::new(vec![None; records.len()]);
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(record) = records.get(i) else { break };
                let done = enrich(record, provider);
                results.lock().expect("results lock")[i] = Some(done);
            });
        }
    });
    results
        .into_inner()
        .expect("results lock")
        .into_iter()
        .map(|r| r.expect("every record processed"))
        .collect()
}

/// Replays provider answers from a JSON file: `{id: metadata | null}`.
/// Ids absent from the file answer "not found"; ids registered through
/// [`RecordedMetadata::with_unavailable`] simulate a timeout.
#[derive(Debug, Clone, Default)]
pub struct RecordedMetadata {
    answers: HashMap<String, Option<PaperMetadata>>,
    unavailable: Vec<String>,
}

impl RecordedMetadata {
    pub fn new(answers: HashMap<String, Option<PaperMetadata>>) -> Self {
        RecordedMetadata {
            answers,
            unavailable: Vec::new(),
        }
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, IngestError> {
        let text = read_file(path.as_ref())?;
        let answers = serde_json::from_str(&text).map_err(|e| IngestError::Parse {
            line: e.line(),
            message: e.to_string(),
        })?;
        Ok(Self::new(answers))
    }

    pub fn with_unavailable(mut self, id: &str) -> Self {
        self.unavailable.push(id.to_string());
        self
    }
}

impl MetadataProvider for RecordedMetadata {
    fn fetch(&self, id: &str) -> Result<Option<PaperMetadata>, ProviderError> {
        if self.unavailable.iter().any(|u| u == id) {
            return Err(ProviderError::Unavailable("timed out".into()));
        }
        Ok(self.answers.get(id).cloned().flatten())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record() -> PublicationRecord {
        PublicationRecord {
            id: "p1".into(),
            title: "Title".into(),
            abstract_text: "Abstract.".into(),
            year: 2021,
            venue: "ACL".into(),
            authors: vec!["A. B.".into()],
            urls: vec![],
            tldr: Some("old".into()),
            citation_count: None,
            is_survey: false,
            topic_ids: vec![],
            references: vec!["p0".into()],
        }
    }

    fn stub(meta: Option<PaperMetadata>) -> RecordedMetadata {
        RecordedMetadata::new(HashMap::from([("p1".to_string(), meta)]))
    }

    #[test]
    fn tldr_filled() {
        let p = stub(Some(PaperMetadata {
            tldr: Some("X".into()),
            ..Default::default()
        }));
        let (out, status) = enrich(&record(), &p);
        assert_eq!(out.tldr.as_deref(), Some("X"));
        assert_eq!(status, EnrichStatus::Enriched);
    }

    #[test]
    fn not_found_leaves_record() {
        let (out, status) = enrich(&record(), &stub(None));
        assert_eq!(out, record());
        assert_eq!(status, EnrichStatus::NotFound);
    }

    #[test]
    fn negative_citations_rejected() {
        let p = stub(Some(PaperMetadata {
            tldr: Some("new".into()),
            citation_count: Some(-3),
            references: None,
        }));
        let (out, status) = enrich(&record(), &p);
        assert_eq!(out, record());
        assert!(matches!(status, EnrichStatus::Rejected(_)));
    }

    #[test]
    fn timeout_leaves_record() {
        let p = stub(None).with_unavailable("p1");
        let (out, status) = enrich(&record(), &p);
        assert_eq!(out, record());
        assert!(matches!(status, EnrichStatus::Unavailable(_)));
    }

    #[test]
    fn empties_never_overwrite() {
        let p = stub(Some(PaperMetadata {
            tldr: Some("  ".into()),
            citation_count: Some(4),
            references: Some(vec!["p1".into()]),
        }));
        let (out, _) = enrich(&record(), &p);
        assert_eq!(out.tldr.as_deref(), Some("old"));
        assert_eq!(out.citation_count, Some(4));
        assert_eq!(out.references, vec!["p0".to_string()]);
    }

    #[test]
    fn idempotent_for_deterministic_stub() {
        let p = stub(Some(PaperMetadata {
            tldr: Some("X".into()),
            citation_count: Some(7),
            references: Some(vec!["p9".into(), "p8".into()]),
        }));
        let (once, _) = enrich(&record(), &p);
        let (twice, status) = enrich(&once, &p);
        assert_eq!(once, twice);
        assert_eq!(status, EnrichStatus::Unchanged);
    }

    #[test]
    fn wire_variants_parse() {
        let flat: PaperMetadata =
            serde_json::from_str(r#"{"tldr":"t","citationCount":3,"references":["a"]}"#).unwrap();
        let nested: PaperMetadata = serde_json::from_str(
            r#"{"tldr":{"text":"t"},"citationCount":3,"references":[{"paperId":"a"},{"paperId":null}]}"#,
        )
        .unwrap();
        assert_eq!(flat, nested);
    }

    #[test]
    fn enrich_all_preserves_order() {
        let mut answers = HashMap::new();
        let records: Vec<_> = (0..20)
            .map(|i| {
                let mut r = record();
                r.id = format!("p{i:02}");
                r.references.clear();
                answers.insert(
                    r.id.clone(),
                    Some(PaperMetadata {
                        citation_count: Some(i),
                        ..Default::default()
                    }),
                );
                r
            })
            .collect();
        let out = enrich_all(&records, &RecordedMetadata::new(answers), 4);
        for (i, (r, _)) in out.iter().enumerate() {
            assert_eq!(r.id, records[i].id);
            assert_eq!(r.citation_count, Some(i as u64));
        }
    }
}
