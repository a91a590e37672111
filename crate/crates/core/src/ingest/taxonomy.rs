use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{read_file, IngestError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TopicLevel {
    Main,
    Sub,
}

impl TopicLevel {
    pub fn as_str(self) -> &'static str {
        match self {
            TopicLevel::Main => "main",
            TopicLevel::Sub => "sub",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "main" => Some(TopicLevel::Main),
            "sub" => Some(TopicLevel::Sub),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaxonomyEntry {
    pub id: String,
    pub name: String,
    pub definition: String,
    pub level: TopicLevel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent_id: Option<String>,
}

#[derive(Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct TaxonomyFile {
    entries: Vec<TaxonomyEntry>,
}

/// Validated two-level topic tree.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Taxonomy {
    entries: Vec<TaxonomyEntry>,
    by_id: HashMap<String, usize>,
}

impl Taxonomy {
    pub fn new(entries: Vec<TaxonomyEntry>) -> Result<Self, IngestError> {
        let mut by_id = HashMap::new();
        for (i, e) in entries.iter().enumerate() {
            if e.id.trim().is_empty() {
                return Err(IngestError::Structure("entry with empty id".into()));
            }
            if by_id.insert(e.id.clone(), i).is_some() {
                return Err(IngestError::Structure(format!(
                    "duplicate topic id {:?}",
                    e.id
                )));
            }
        }
        let mut names: HashSet<(TopicLevel, String)> = HashSet::new();
        for e in &entries {
            if !names.insert((e.level, e.name.to_lowercase())) {
                return Err(IngestError::Structure(format!(
                    "duplicate {} topic name {:?}",
                    e.level.as_str(),
                    e.name
                )));
            }
            match (e.level, &e.parent_id) {
                (TopicLevel::Main, Some(p)) => {
                    return Err(IngestError::Structure(format!(
                        "main topic {:?} has parent {p:?}",
                        e.id
                    )))
                }
                (TopicLevel::Main, None) => {}
                (TopicLevel::Sub, None) => {
                    return Err(IngestError::Structure(format!(
                        "subtopic {:?} has no parent",
                        e.id
                    )))
                }
                (TopicLevel::Sub, Some(p)) => match by_id.get(p).map(|&i| &entries[i]) {
                    None => {
                        return Err(IngestError::Structure(format!(
                            "subtopic {:?} references missing parent {p:?}",
                            e.id
                        )))
                    }
                    Some(parent) if parent.level != TopicLevel::Main => {
                        return Err(IngestError::Structure(format!(
                            "subtopic {:?} has non-main parent {p:?}",
                            e.id
                        )))
                    }
                    Some(_) => {}
                },
            }
        }
        Ok(Taxonomy { entries, by_id })
    }

    pub fn entries(&self) -> &[TaxonomyEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&TaxonomyEntry> {
        self.by_id.get(id).map(|&i| &self.entries[i])
    }

    /// Case-insensitive exact name lookup.
    pub fn find_by_name(&self, name: &str) -> Option<&TaxonomyEntry> {
        let wanted = name.trim().to_lowercase();
        self.entries
            .iter()
            .find(|e| e.name.to_lowercase() == wanted)
    }

    pub fn at_level(&self, level: TopicLevel) -> impl Iterator<Item = &TaxonomyEntry> {
        self.entries.iter().filter(move |e| e.level == level)
    }

    /// Subtopics of a main topic, in id order.
    pub fn children(&self, main_id: &str) -> Vec<&TaxonomyEntry> {
        let mut kids: Vec<_> = self
            .entries
            .iter()
            .filter(|e| e.parent_id.as_deref() == Some(main_id))
            .collect();
        kids.sort_by(|a, b| a.id.cmp(&b.id));
        kids
    }

    /// Main topics with their subtopics, ids ascending.
    pub fn tree(&self) -> BTreeMap<&str, Vec<&TaxonomyEntry>> {
        self.at_level(TopicLevel::Main)
            .map(|m| (m.id.as_str(), self.children(&m.id)))
            .collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&TaxonomyFile {
            entries: self.entries.clone(),
        })
        .expect("taxonomy serializes")
    }
}

pub fn load_taxonomy(path: impl AsRef<Path>) -> Result<Taxonomy, IngestError> {
    let text = read_file(path.as_ref())?;
    parse_taxonomy(&text)
}

pub(crate) fn parse_taxonomy(text: &str) -> Result<Taxonomy, IngestError> {
    let file: TaxonomyFile = serde_json::from_str(text).map_err(|e| IngestError::Parse {
        line: e.line(),
        message: e.to_string(),
    })?;
    Taxonomy::new(file.entries)
}
