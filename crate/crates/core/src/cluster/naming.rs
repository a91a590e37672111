use std::collections::{BTreeMap, BTreeSet, HashMap};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::ClusterNode;
use crate::llm::{complete_timed, GenerationParams, PromptName, PromptTemplate, TextGenerator};
use crate::text::tokenize;

pub const NGRAM_MIN: usize = 2;
pub const NGRAM_MAX: usize = 5;
/// Labels kept per cluster for deduplication.
const CANDIDATES: usize = 3;
const MAX_NAME_CHARS: usize = 120;
const SAMPLE_TITLES: usize = 5;

/// Which clusters form the idf corpus when naming a cluster.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IdfScope {
    /// Clusters sharing the parent; roots use all roots of the topic.
    #[default]
    Siblings,
    /// Every cluster of the topic.
    Topic,
}

/// Contiguous n-grams (2 to 5 tokens) of one title. N-grams never span two
/// titles.
pub fn ngrams(title: &str) -> Vec<String> {
    let tokens = tokenize(title);
    let mut out = Vec::new();
    for n in NGRAM_MIN..=NGRAM_MAX {
        for w in tokens.windows(n) {
            out.push(w.join(" "));
        }
    }
    out
}

/// tf·idf over cluster "documents", each the bag of its member titles.
///
/// tf is the raw count in the document, idf = ln((1 + N) / (1 + df)) + 1.
#[derive(Debug, Clone, PartialEq)]
pub struct TfidfModel {
    pub vocabulary: BTreeMap<String, usize>,
    pub idf: Vec<f64>,
    pub n_docs: usize,
}

impl TfidfModel {
    pub fn fit(docs: &[Vec<&str>]) -> Self {
        let mut df: BTreeMap<String, usize> = BTreeMap::new();
        for doc in docs {
            let grams: BTreeSet<String> = doc.iter().flat_map(|t| ngrams(t)).collect();
            for g in grams {
                *df.entry(g).or_default() += 1;
            }
        }
        let n = docs.len() as f64;
        let mut vocabulary = BTreeMap::new();
        let mut idf = Vec::with_capacity(df.len());
        for (i, (g, d)) in df.into_iter().enumerate() {
            vocabulary.insert(g, i);
            idf.push(((1.0 + n) / (1.0 + d as f64)).ln() + 1.0);
        }
        TfidfModel {
            vocabulary,
            idf,
            n_docs: docs.len(),
        }
    }

    pub fn idf_of(&self, gram: &str) -> Option<f64> {
        self.vocabulary.get(gram).map(|&i| self.idf[i])
    }

    /// Every n-gram of `doc` with its score, best first: score descending,
    /// then more tokens, then lexicographic.
    pub fn rank(&self, doc: &[&str]) -> Vec<(String, f64)> {
        let mut tf: BTreeMap<String, usize> = BTreeMap::new();
        for title in doc {
            for g in ngrams(title) {
                *tf.entry(g).or_default() += 1;
            }
        }
        let mut scored: Vec<(String, f64)> = tf
            .into_iter()
            .map(|(g, c)| {
                let idf = self.idf_of(&g).unwrap_or(1.0);
                (g, c as f64 * idf)
            })
            .collect();
        scored.sort_by(|a, b| {
            b.1.total_cmp(&a.1)
                .then_with(|| token_count(&b.0).cmp(&token_count(&a.0)))
                .then_with(|| a.0.cmp(&b.0))
        });
        scored
    }
}

fn token_count(gram: &str) -> usize {
    gram.split(' ').count()
}

/// Most frequent token, ties lexicographic. Used when no title has two tokens.
fn top_unigram(doc: &[&str]) -> Option<String> {
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for t in doc.iter().flat_map(|t| tokenize(t)) {
        *counts.entry(t).or_default() += 1;
    }
    let best = counts.values().copied().max()?;
    counts.into_iter().find(|(_, c)| *c == best).map(|(t, _)| t)
}

/// Ranked labels of `docs[target]` against the corpus `docs`.
pub fn rank_labels(docs: &[Vec<&str>], target: usize) -> Vec<(String, f64)> {
    TfidfModel::fit(docs).rank(&docs[target])
}

/// Best label of `docs[target]`, falling back to its most frequent token.
pub fn tfidf_name(docs: &[Vec<&str>], target: usize) -> String {
    rank_labels(docs, target)
        .into_iter()
        .next()
        .map(|(g, _)| g)
        .or_else(|| top_unigram(&docs[target]))
        .unwrap_or_default()
}

/// Sets `tfidf_name`, `label_candidates` and `display_name` for every node.
pub fn name_clusters(nodes: &mut [ClusterNode], titles: &HashMap<String, String>, scope: IdfScope) {
    let group_key = |n: &ClusterNode| match scope {
        IdfScope::Siblings => (n.topic_id.clone(), n.parent_id.clone()),
        IdfScope::Topic => (n.topic_id.clone(), None),
    };
    let mut groups: BTreeMap<(String, Option<String>), Vec<usize>> = BTreeMap::new();
    for (i, n) in nodes.iter().enumerate() {
        groups.entry(group_key(n)).or_default().push(i);
    }
    for members in groups.values() {
        let docs: Vec<Vec<&str>> = members
            .iter()
            .map(|&i| {
                nodes[i]
                    .member_ids
                    .iter()
                    .filter_map(|id| titles.get(id).map(String::as_str))
                    .collect()
            })
            .collect();
        let model = TfidfModel::fit(&docs);
        let labels: Vec<Vec<String>> = docs
            .iter()
            .map(|doc| {
                let mut ranked: Vec<String> = model
                    .rank(doc)
                    .into_iter()
                    .take(CANDIDATES)
                    .map(|(g, _)| g)
                    .collect();
                if ranked.is_empty() {
                    ranked.extend(top_unigram(doc));
                }
                ranked
            })
            .collect();
        for (&i, labels) in members.iter().zip(labels) {
            let name = labels
                .first()
                .cloned()
                .unwrap_or_else(|| nodes[i].id.clone());
            nodes[i].tfidf_name = name.clone();
            nodes[i].display_name = name;
            nodes[i].label_candidates = labels;
        }
    }
}

/// Makes display names unique within each topic.
///
/// Clusters are visited in ascending id order. A cluster whose best label is
/// taken tries its second and third label, then the best label suffixed
/// " (n)" with the smallest free n >= 2.
pub fn dedup_names(nodes: &mut [ClusterNode]) {
    let mut order: Vec<usize> = (0..nodes.len()).collect();
    order.sort_by(|&a, &b| nodes[a].id.cmp(&nodes[b].id));
    let mut taken: HashMap<String, BTreeSet<String>> = HashMap::new();
    for i in order {
        let node = &nodes[i];
        let used = taken.entry(node.topic_id.clone()).or_default();
        let first = node
            .label_candidates
            .first()
            .cloned()
            .unwrap_or_else(|| node.display_name.clone());
        let pick = node
            .label_candidates
            .iter()
            .take(CANDIDATES)
            .find(|c| !used.contains(*c))
            .cloned()
            .or_else(|| (!used.contains(&first)).then(|| first.clone()))
            .unwrap_or_else(|| {
                (2..)
                    .map(|n| format!("{first} ({n})"))
                    .find(|c| !used.contains(c))
                    .expect("some suffix is free")
            });
        used.insert(pick.clone());
        nodes[i].display_name = pick;
    }
}

/// Up to five member titles drawn by a generator seeded from `seed` and the
/// cluster id, in draw order. Clusters with fewer titles return them all.
pub fn sample_titles<'a>(cluster_id: &str, titles: &[&'a str], seed: u64) -> Vec<&'a str> {
    if titles.len() <= SAMPLE_TITLES {
        return titles.to_vec();
    }
    let digest = Sha256::digest(cluster_id.as_bytes());
    let salt = u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"));
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ salt);
    titles
        .choose_multiple(&mut rng, SAMPLE_TITLES)
        .copied()
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RenameOutcome {
    Renamed(String),
    /// The answer was unusable; the current name stays.
    Rejected(String),
    /// The endpoint failed; the current name stays.
    Failed(String),
}

fn clean(answer: &str) -> String {
    answer
        .trim_matches(|c: char| {
            c.is_whitespace() || "\"'`\u{201c}\u{201d}\u{2018}\u{2019}".contains(c)
        })
        .to_string()
}

/// Asks the generator for a friendlier name for `node`.
///
/// `taken` holds the other display names of the topic; an answer colliding
/// with one of them is rejected.
pub fn llm_rename(
    node: &ClusterNode,
    member_titles: &[&str],
    backend: &dyn TextGenerator,
    seed: u64,
    taken: &BTreeSet<String>,
) -> RenameOutcome {
    let sample = sample_titles(&node.id, member_titles, seed);
    let formatted: Vec<String> = sample.iter().map(|t| format!("- {t}")).collect();
    let bindings = BTreeMap::from([
        ("tfidf_cluster_name".to_string(), node.tfidf_name.clone()),
        ("len(paper_list)".to_string(), sample.len().to_string()),
        ("paper_titles_formatted".to_string(), formatted.join("\n")),
    ]);
    let prompt = PromptTemplate::get(PromptName::ClusterName)
        .render(&bindings)
        .expect("cluster-name bindings are complete");
    let answer = match complete_timed(&prompt, &GenerationParams::CLUSTER_NAME, backend) {
        Ok(r) => clean(&r.text),
        Err(e) => return RenameOutcome::Failed(e.to_string()),
    };
    if answer.is_empty() {
        return RenameOutcome::Rejected("empty answer".into());
    }
    if answer.chars().count() > MAX_NAME_CHARS {
        return RenameOutcome::Rejected(format!("answer longer than {MAX_NAME_CHARS} characters"));
    }
    if tokenize(&answer).iter().any(|t| t == "cluster") {
        return RenameOutcome::Rejected("answer mentions the word cluster".into());
    }
    if taken.contains(&answer) {
        return RenameOutcome::Rejected("name already used in this topic".into());
    }
    RenameOutcome::Renamed(answer)
}
