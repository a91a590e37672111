use std::collections::{BTreeMap, HashMap};

use crate::index::VectorIndex;
use crate::provider::ProviderError;
use crate::scalar::norm;
use crate::text::{is_stopword, tokenize};

/// Turns free text into a vector in the publication embedding space.
///
/// `Ok(None)` means the text shares nothing with the corpus, which callers
/// treat as out of scope.
pub trait QueryEncoder: Send + Sync {
    fn encode(&self, text: &str) -> Result<Option<Vec<f64>>, ProviderError>;
}

/// Offline encoder: ranks publications lexically against the query and
/// returns the score-weighted mean direction of the best matches' unit
/// embeddings. Stands in for a sentence-embedding model when none is
/// configured.
#[derive(Debug, Clone)]
pub struct KeywordProjectionEncoder {
    ids: Vec<String>,
    unit_vectors: Vec<Vec<f64>>,
    postings: HashMap<String, Vec<(usize, u32)>>,
    idf: HashMap<String, f64>,
    top_m: usize,
}

/// Lowercased content terms with a crude plural strip.
pub(crate) fn terms(text: &str) -> Vec<String> {
    tokenize(text)
        .into_iter()
        .filter(|t| !is_stopword(t) && t.chars().any(char::is_alphabetic))
        .map(|t| {
            if t.len() > 3 && t.ends_with('s') && !t.ends_with("ss") {
                t[..t.len() - 1].to_string()
            } else {
                t
            }
        })
        .collect()
}

impl KeywordProjectionEncoder {
    pub const DEFAULT_TOP_M: usize = 10;

    /// `docs` pairs a publication id with its searchable text. Ids missing
    /// from `index` are skipped.
    pub fn new<'a>(
        docs: impl IntoIterator<Item = (&'a str, &'a str)>,
        index: &VectorIndex<f64>,
        top_m: usize,
    ) -> Self {
        let mut ids = Vec::new();
        let mut unit_vectors = Vec::new();
        let mut postings: HashMap<String, Vec<(usize, u32)>> = HashMap::new();
        for (id, text) in docs {
            let Some(v) = index.get(id) else { continue };
            let n = norm(v);
            let doc = ids.len();
            ids.push(id.to_string());
            unit_vectors.push(v.iter().map(|x| x / n).collect());
            let mut tf: BTreeMap<String, u32> = BTreeMap::new();
            for t in terms(text) {
                *tf.entry(t).or_default() += 1;
            }
            for (t, c) in tf {
                postings.entry(t).or_default().push((doc, c));
            }
        }
        let n_docs = ids.len() as f64;
        let idf = postings
            .iter()
            .map(|(t, p)| {
                (
                    t.clone(),
                    ((1.0 + n_docs) / (1.0 + p.len() as f64)).ln() + 1.0,
                )
            })
            .collect();
        KeywordProjectionEncoder {
            ids,
            unit_vectors,
            postings,
            idf,
            top_m: top_m.max(1),
        }
    }

    /// Lexical relevance of each matching document, best first, ties by id.
    pub fn rank(&self, text: &str) -> Vec<(String, f64)> {
        let mut query: Vec<String> = terms(text);
        query.sort();
        query.dedup();
        let mut scores: HashMap<usize, f64> = HashMap::new();
        for t in &query {
            let Some(posting) = self.postings.get(t) else {
                continue;
            };
            let idf = self.idf[t];
            for &(doc, tf) in posting {
                *scores.entry(doc).or_default() += (1.0 + f64::from(tf).ln()) * idf;
            }
        }
        let mut ranked: Vec<(String, f64)> = scores
            .into_iter()
            .map(|(d, s)| (self.ids[d].clone(), s))
            .collect();
        ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        ranked
    }
}

impl QueryEncoder for KeywordProjectionEncoder {
    fn encode(&self, text: &str) -> Result<Option<Vec<f64>>, ProviderError> {
        let ranked = self.rank(text);
        if ranked.is_empty() {
            return Ok(None);
        }
        let position: HashMap<&str, usize> = self
            .ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.as_str(), i))
            .collect();
        let dim = self.unit_vectors[0].len();
        let mut out = vec![0.0; dim];
        for (id, score) in ranked.iter().take(self.top_m) {
            let v = &self.unit_vectors[position[id.as_str()]];
            for (o, x) in out.iter_mut().zip(v) {
                *o += score * x;
            }
        }
        if norm(&out) == 0.0 {
            return Ok(None);
        }
        Ok(Some(out))
    }
}
