//! Deterministic synthetic corpora: the 200-paper desk fixture, topic blobs
//! for threshold tests and a large multi-topic set for hierarchy checks.
//!
//! Desk fixture geometry, per subtopic `s` of main topic `m` (all directions
//! unit length, `w` and `v` orthogonalized against each other):
//!
//! * centre `μ = 14·u_m + 14·u_s`
//! * theme A at `μ + 3.5·w`, theme B at `μ − 3.5·w`
//! * A splits into A1 at `A + 2·v` and A2 at `A − 2·v`
//! * every paper adds N(0, 0.08²) noise per coordinate
//!
//! Under Ward linkage A1 and A2 join at about `sqrt(2·n1·n2/(n1+n2))·4`,
//! between 8.9 and 9.4 for the sizes used, so the depth-0 cut at 10 keeps A
//! whole and the depth-1 cut at 8 separates it. A and B join near 19.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::cluster::TopicMembers;
use crate::ingest::{
    to_jsonl, EmbeddingRecord, Embeddings, PublicationRecord, Taxonomy, TaxonomyEntry, TopicLevel,
};
use crate::scalar::{dot, norm};

pub const DESK_DIM: usize = 64;
pub const DESK_SEED: u64 = 20_240_601;
const NOISE: f64 = 0.08;

struct Theme {
    phrase: &'static str,
    task: &'static str,
}

struct Subtopic {
    id: &'static str,
    name: &'static str,
    definition: &'static str,
    backgrounds: [&'static str; 2],
    datasets: [&'static str; 2],
    metric: &'static str,
    /// A1, A2 (sharing an umbrella phrase) and B.
    themes: [Theme; 3],
}

struct MainTopic {
    id: &'static str,
    name: &'static str,
    definition: &'static str,
    subs: [Subtopic; 3],
}

macro_rules! theme {
    ($p:expr, $t:expr) => {
        Theme {
            phrase: $p,
            task: $t,
        }
    };
}

const TAXONOMY: [MainTopic; 4] = [
    MainTopic {
        id: "sentiment-analysis",
        name: "Sentiment Analysis",
        definition: "Research on identifying and quantifying opinions, attitudes and affective states expressed in text.",
        subs: [
            Subtopic {
                id: "emotion-analysis",
                name: "Emotion Analysis",
                definition: "Detecting and classifying the emotions people express in text, such as joy, anger, fear or sadness.",
                backgrounds: [
                    "People increasingly express their feelings on social media, which makes these platforms a rich source for studying emotions.",
                    "Understanding how people express feelings and emotions online matters for mental health research and crisis response.",
                ],
                datasets: ["a corpus of annotated social media posts", "a multi-label emotion benchmark"],
                metric: "macro F1",
                themes: [
                    theme!("Social Media Emotion Detection", "detecting the emotions people express in social media posts"),
                    theme!("Social Media Mental Health Monitoring", "monitoring stress and anxiety in social media posts during the COVID-19 pandemic"),
                    theme!("Emotion Recognition in Conversations", "recognizing the emotions of speakers in multi-party conversations"),
                ],
            },
            Subtopic {
                id: "aspect-based-sentiment-analysis",
                name: "Aspect-based Sentiment Analysis",
                definition: "Determining the sentiment expressed towards specific aspects or attributes of an entity.",
                backgrounds: [
                    "Customer reviews often praise one aspect of a product while criticizing another.",
                    "Fine-grained opinions about individual aspects are more useful to businesses than an overall rating.",
                ],
                datasets: ["the SemEval restaurant and laptop reviews", "a hotel review corpus"],
                metric: "F1",
                themes: [
                    theme!("Aspect Sentiment Triplet Extraction", "extracting aspect, opinion and sentiment triplets from reviews"),
                    theme!("Aspect Sentiment in Restaurant Reviews", "predicting the sentiment towards aspects mentioned in restaurant reviews"),
                    theme!("Opinion Target Extraction", "identifying the targets of opinions in review sentences"),
                ],
            },
            Subtopic {
                id: "polarity-analysis",
                name: "Polarity Analysis",
                definition: "Classifying a text as expressing positive, negative or neutral sentiment.",
                backgrounds: [
                    "Deciding whether a text is positive or negative is a long-standing problem with many commercial uses.",
                    "Overall sentiment polarity remains a standard testbed for text classification methods.",
                ],
                datasets: ["a large product review collection", "a movie review benchmark"],
                metric: "accuracy",
                themes: [
                    theme!("Polarity Classification of Product Reviews", "classifying the polarity of product reviews"),
                    theme!("Multilingual Polarity Classification", "classifying sentiment polarity across many languages"),
                    theme!("Document-level Sentiment Regression", "predicting fine-grained sentiment scores for whole documents"),
                ],
            },
        ],
    },
    MainTopic {
        id: "text-generation",
        name: "Text Generation",
        definition: "Research on producing fluent natural language text from structured or unstructured input.",
        subs: [
            Subtopic {
                id: "question-generation",
                name: "Question Generation",
                definition: "Automatically generating questions from text, for example to build exams and quizzes for learners.",
                backgrounds: [
                    "Writing exam questions by hand is time-consuming for instructors, especially for large courses.",
                    "Automatically generated questions can help teachers assess the learning progress of students.",
                ],
                datasets: ["a collection of course materials with exam questions", "a reading comprehension dataset"],
                metric: "BLEU",
                themes: [
                    theme!("Multiple-choice Question Generation", "generating multiple-choice questions with plausible answer options"),
                    theme!("Question Generation for Programming Exams", "generating exam questions from programming course materials"),
                    theme!("Automatic Distractor Generation", "generating distractors for multiple-choice exam items"),
                ],
            },
            Subtopic {
                id: "summarization",
                name: "Summarization",
                definition: "Producing a short text that conveys the most important information of one or more documents.",
                backgrounds: [
                    "The growing volume of text makes concise summaries increasingly valuable.",
                    "Readers often need the gist of long documents without reading them in full.",
                ],
                datasets: ["a news summarization corpus", "a collection of paper abstracts and full texts"],
                metric: "ROUGE-L",
                themes: [
                    theme!("Abstractive Summarization of News Articles", "writing abstractive summaries of news articles"),
                    theme!("Abstractive Summarization for Scientific Papers", "summarizing long scientific papers abstractively"),
                    theme!("Extractive Meeting Summarization", "selecting the key utterances of meeting transcripts"),
                ],
            },
            Subtopic {
                id: "dialogue-response-generation",
                name: "Dialogue Response Generation",
                definition: "Generating the next turn of a conversation given the dialogue history.",
                backgrounds: [
                    "Open-domain chatbots must produce replies that are fluent, relevant and engaging.",
                    "Conversational agents are expected to respond appropriately across many turns.",
                ],
                datasets: ["a crowd-sourced chit-chat corpus", "a knowledge-grounded dialogue benchmark"],
                metric: "human preference",
                themes: [
                    theme!("Empathetic Response Generation", "generating empathetic replies in open-domain dialogue"),
                    theme!("Knowledge-grounded Response Generation", "grounding dialogue replies in external documents"),
                    theme!("Persona-consistent Dialogue Agents", "keeping a consistent persona across dialogue turns"),
                ],
            },
        ],
    },
    MainTopic {
        id: "information-extraction",
        name: "Information Extraction",
        definition: "Research on turning unstructured text into structured facts about entities, relations and events.",
        subs: [
            Subtopic {
                id: "named-entity-recognition",
                name: "Named Entity Recognition",
                definition: "Locating and classifying mentions of named entities such as persons, organizations and locations.",
                backgrounds: [
                    "Entity mentions are the basic building blocks of many downstream extraction systems.",
                    "Recognizing entity spans remains difficult in specialized domains with little labelled data.",
                ],
                datasets: ["a biomedical abstract corpus", "a newswire entity benchmark"],
                metric: "span F1",
                themes: [
                    theme!("Biomedical Named Entity Recognition", "recognizing genes, diseases and chemicals in biomedical text"),
                    theme!("Nested Named Entity Recognition", "recognizing entity mentions that contain other mentions"),
                    theme!("Entity Typing with Weak Supervision", "assigning fine-grained types to entity mentions with noisy labels"),
                ],
            },
            Subtopic {
                id: "relation-extraction",
                name: "Relation Extraction",
                definition: "Identifying semantic relations that hold between entities mentioned in text.",
                backgrounds: [
                    "Knowledge bases depend on accurate relations between entities mined from text.",
                    "Many relations are only expressed across several sentences of a document.",
                ],
                datasets: ["a document-level relation corpus", "a few-shot relation benchmark"],
                metric: "F1",
                themes: [
                    theme!("Document-level Relation Extraction", "extracting relations between entities across whole documents"),
                    theme!("Few-shot Relation Extraction", "learning new relation types from a handful of examples"),
                    theme!("Open Information Extraction Triples", "extracting schema-free subject, relation and object triples"),
                ],
            },
            Subtopic {
                id: "event-extraction",
                name: "Event Extraction",
                definition: "Detecting event mentions in text together with their participants, time and place.",
                backgrounds: [
                    "News streams report countless events whose participants and timing must be tracked.",
                    "Structured event records support forecasting and situational awareness.",
                ],
                datasets: ["an annotated news event corpus", "a multilingual event benchmark"],
                metric: "argument F1",
                themes: [
                    theme!("Event Extraction from News", "extracting structured events from news reports"),
                    theme!("Zero-shot Event Extraction", "extracting events of unseen types without annotated examples"),
                    theme!("Temporal Relation Ordering of Events", "ordering events mentioned in text along a timeline"),
                ],
            },
        ],
    },
    MainTopic {
        id: "multilinguality",
        name: "Multilinguality",
        definition: "Research on processing and relating text across multiple languages.",
        subs: [
            Subtopic {
                id: "machine-translation",
                name: "Machine Translation",
                definition: "Automatically translating text from a source language into a target language.",
                backgrounds: [
                    "Translation systems still struggle with language pairs that have little parallel data.",
                    "Sentence-level translation ignores context that human translators rely on.",
                ],
                datasets: ["a low-resource parallel corpus", "a document-aligned translation benchmark"],
                metric: "BLEU",
                themes: [
                    theme!("Low-resource Neural Machine Translation", "translating between languages with little parallel data"),
                    theme!("Document-level Machine Translation", "translating documents while keeping cross-sentence context"),
                    theme!("Translation Quality Estimation", "predicting the quality of translations without references"),
                ],
            },
            Subtopic {
                id: "cross-lingual-transfer",
                name: "Cross-lingual Transfer",
                definition: "Transferring models trained in one language to other languages with few or no labels.",
                backgrounds: [
                    "Labelled data exists for only a small fraction of the world's languages.",
                    "Multilingual encoders promise to share knowledge between high- and low-resource languages.",
                ],
                datasets: ["a multilingual tagging benchmark", "a cross-lingual inference dataset"],
                metric: "accuracy",
                themes: [
                    theme!("Cross-lingual Transfer for Tagging", "transferring sequence taggers to new languages"),
                    theme!("Zero-shot Cross-lingual Transfer", "applying models to languages never seen during fine-tuning"),
                    theme!("Multilingual Sentence Embeddings", "learning sentence representations shared across languages"),
                ],
            },
            Subtopic {
                id: "code-switching",
                name: "Code-Switching",
                definition: "Processing text or speech that alternates between two or more languages.",
                backgrounds: [
                    "Multilingual speakers frequently mix languages within a single utterance.",
                    "Mixed-language input breaks the assumptions of monolingual pipelines.",
                ],
                datasets: ["a mixed-language tweet corpus", "a code-switched speech collection"],
                metric: "accuracy",
                themes: [
                    theme!("Code-switching Language Identification", "identifying the language of each token in mixed-language text"),
                    theme!("Code-switching Sentiment Analysis", "analysing sentiment in mixed-language posts"),
                    theme!("Code-switched Speech Recognition", "transcribing speech that switches between languages"),
                ],
            },
        ],
    },
];

/// Title suffix, method noun phrase for abstracts, short method name.
const METHODS: [(&str, &str, &str); 9] = [
    (
        " with Contrastive Learning",
        "a contrastive learning objective",
        "contrastive learning",
    ),
    (
        " via Prompting Large Language Models",
        "a prompting strategy for large language models",
        "prompting",
    ),
    (
        " Using Graph Neural Networks",
        "a graph neural network encoder",
        "graph-based encoders",
    ),
    (
        " with Limited Supervision",
        "a semi-supervised training scheme",
        "semi-supervised training",
    ),
    (
        " through Data Augmentation",
        "a data augmentation pipeline",
        "data augmentation",
    ),
    (
        " with Pretrained Transformers",
        "a fine-tuned pretrained transformer",
        "pretrained transformers",
    ),
    (
        " Using Multi-task Learning",
        "a multi-task learning framework",
        "multi-task learning",
    ),
    (
        " with Adversarial Training",
        "an adversarial training procedure",
        "adversarial training",
    ),
    (
        ": A New Benchmark",
        "a new benchmark and strong baselines",
        "careful benchmarking",
    ),
];

const PREFIXES: [&str; 8] = [
    "",
    "Improving ",
    "Revisiting ",
    "Towards Robust ",
    "Efficient ",
    "Explainable ",
    "Scalable ",
    "Interpretable ",
];

const VENUES: [(&str, &str); 6] = [
    ("ACL", "acl-long"),
    ("EMNLP", "emnlp-main"),
    ("NAACL", "naacl-main"),
    ("COLING", "coling-main"),
    ("EACL", "eacl-main"),
    ("LREC", "lrec-main"),
];

const FIRST: [&str; 16] = [
    "Anna", "Ben", "Chen", "Dana", "Elif", "Farid", "Greta", "Hiro", "Ines", "Jonas", "Kavya",
    "Luis", "Mira", "Nils", "Olga", "Priya",
];
const LAST: [&str; 16] = [
    "Schmidt", "Okafor", "Li", "Novak", "Yilmaz", "Haddad", "Berg", "Tanaka", "Costa", "Meyer",
    "Rao", "Garcia", "Kowalski", "Larsen", "Petrova", "Singh",
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExpectedCounts {
    pub nodes: BTreeMap<String, usize>,
    pub edges: BTreeMap<String, usize>,
}

/// Publications, taxonomy and embeddings of the desk fixture, plus counts
/// the generator knows by construction.
#[derive(Debug, Clone)]
pub struct DeskFixture {
    pub taxonomy: Taxonomy,
    pub records: Vec<PublicationRecord>,
    pub embeddings: Embeddings,
    pub expected: ExpectedCounts,
    /// Theme label ("A1", "A2" or "B") of every publication.
    pub themes: BTreeMap<String, String>,
}

fn unit(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
    let n = norm(&v);
    v.into_iter().map(|x| x / n).collect()
}

/// Removes the components of `v` along each (unit) vector in `basis`.
fn orthogonalize(mut v: Vec<f64>, basis: &[&[f64]]) -> Vec<f64> {
    for b in basis {
        let p = dot(&v, b);
        for (x, y) in v.iter_mut().zip(b.iter()) {
            *x -= p * y;
        }
    }
    let n = norm(&v);
    v.into_iter().map(|x| x / n).collect()
}

fn axpy(base: &[f64], a: f64, dir: &[f64]) -> Vec<f64> {
    base.iter().zip(dir).map(|(b, d)| b + a * d).collect()
}

fn round6(x: f64) -> f64 {
    (x * 1e6).round() / 1e6
}

fn lower_first(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_lowercase().chain(c).collect(),
        None => String::new(),
    }
}

/// Builds the 200-paper fixture: 4 main topics with 3 subtopics each,
/// 17 papers in each of the first eight subtopics and 16 in the rest.
pub fn desk_fixture(seed: u64) -> DeskFixture {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, NOISE).expect("valid sigma");
    let mut entries = Vec::new();
    let mut records: Vec<PublicationRecord> = Vec::new();
    let mut vectors = Vec::new();
    let mut themes = BTreeMap::new();
    let mut authors_seen = BTreeSet::new();
    let mut venues_seen = BTreeSet::new();
    let mut authored_by = 0;
    let mut cites = 0;
    let mut sub_index = 0;

    for main in &TAXONOMY {
        entries.push(TaxonomyEntry {
            id: main.id.into(),
            name: main.name.into(),
            definition: main.definition.into(),
            level: TopicLevel::Main,
            parent_id: None,
        });
        let u_main = unit(&mut rng, DESK_DIM);
        for sub in &main.subs {
            entries.push(TaxonomyEntry {
                id: sub.id.into(),
                name: sub.name.into(),
                definition: sub.definition.into(),
                level: TopicLevel::Sub,
                parent_id: Some(main.id.into()),
            });
            let u_sub = unit(&mut rng, DESK_DIM);
            let centre: Vec<f64> = u_main
                .iter()
                .zip(&u_sub)
                .map(|(a, b)| 14.0 * a + 14.0 * b)
                .collect();
            let w = orthogonalize(unit(&mut rng, DESK_DIM), &[]);
            let v = orthogonalize(unit(&mut rng, DESK_DIM), &[&w]);
            let a = axpy(&centre, 3.5, &w);
            let centres = [
                axpy(&a, 2.0, &v),
                axpy(&a, -2.0, &v),
                axpy(&centre, -3.5, &w),
            ];
            let sizes = if sub_index < 8 { [6, 5, 6] } else { [5, 5, 6] };
            sub_index += 1;
            let first_of_sub = records.len();

            for (t, theme) in sub.themes.iter().enumerate() {
                let mut combos: Vec<(usize, usize)> = (0..PREFIXES.len())
                    .flat_map(|p| (0..METHODS.len()).map(move |m| (p, m)))
                    .collect();
                combos.shuffle(&mut rng);
                for (k, &(p, m)) in combos.iter().take(sizes[t]).enumerate() {
                    let idx = records.len() + 1;
                    let id = format!("p{idx:04}");
                    let survey = t == 0 && k == 0;
                    let (suffix, method_np, method_short) = METHODS[m];
                    let title = if survey {
                        format!("{}: A Survey", theme.phrase)
                    } else {
                        format!("{}{}{}", PREFIXES[p], theme.phrase, suffix)
                    };
                    let dataset = sub.datasets[rng.gen_range(0..2)];
                    let mut sentences = vec![sub.backgrounds[rng.gen_range(0..2)].to_string()];
                    sentences.push(if survey {
                        format!(
                            "This paper presents a survey of recent work on {}.",
                            theme.task
                        )
                    } else {
                        match rng.gen_range(0..3) {
                            0 => format!("We propose {method_np} for {}.", theme.task),
                            1 => format!("This paper presents {method_np} for {}.", theme.task),
                            _ => format!(
                                "In this paper, we investigate {} with {method_np}.",
                                theme.task
                            ),
                        }
                    });
                    sentences.push(match rng.gen_range(0..2) {
                        0 => format!("We train our models on {dataset} and compare them with strong baselines."),
                        _ => format!("Our approach combines {method_short} with careful error analysis on {dataset}."),
                    });
                    let gain = f64::from(rng.gen_range(8..60u32)) / 10.0;
                    sentences.push(match rng.gen_range(0..2) {
                        0 => format!("Results show that the proposed model improves {} by {gain} points on {dataset}.", sub.metric),
                        _ => format!("Experiments show gains of {gain} {} points over the previous best system.", sub.metric),
                    });
                    if rng.gen_bool(0.5) {
                        sentences.push(match rng.gen_range(0..2) {
                            0 => format!(
                                "These findings suggest that {} benefits from {method_short}.",
                                theme.task
                            ),
                            _ => "We release our code and data to support future work.".to_string(),
                        });
                    }
                    let year = rng.gen_range(2012..=2023);
                    let (venue, venue_code) = VENUES[rng.gen_range(0..VENUES.len())];
                    let n_authors = rng.gen_range(1..=4);
                    let mut authors: Vec<String> = Vec::new();
                    while authors.len() < n_authors {
                        let name = format!(
                            "{} {}",
                            FIRST[rng.gen_range(0..FIRST.len())],
                            // Authors cluster by main topic so some are shared.
                            LAST[(rng.gen_range(0..6) + 3 * (sub_index % 4)) % LAST.len()]
                        );
                        if !authors.contains(&name) {
                            authors.push(name);
                        }
                    }
                    let urls = if rng.gen_bool(0.9) {
                        vec![format!(
                            "https://aclanthology.org/{year}.{venue_code}.{idx}.pdf"
                        )]
                    } else {
                        Vec::new()
                    };
                    let tldr = rng.gen_bool(0.85).then(|| {
                        format!(
                            "Shows that {method_short} helps with {}.",
                            lower_first(theme.task)
                        )
                    });
                    let citation_count = rng.gen_bool(0.9).then(|| rng.gen_range(0..300));
                    let mut references = BTreeSet::new();
                    let earlier = records.len() - first_of_sub;
                    for _ in 0..rng.gen_range(0..=3usize).min(earlier) {
                        references.insert(format!(
                            "p{:04}",
                            first_of_sub + 1 + rng.gen_range(0..earlier)
                        ));
                    }
                    cites += references.len();
                    let mut references: Vec<String> = references.into_iter().collect();
                    if rng.gen_bool(0.3) {
                        references.push(format!("ext-{:05}", rng.gen_range(0..100_000)));
                    }
                    authored_by += authors.len();
                    authors_seen.extend(authors.iter().cloned());
                    venues_seen.insert(venue);
                    let vector: Vec<f64> = centres[t]
                        .iter()
                        .map(|c| round6(c + noise.sample(&mut rng)))
                        .collect();
                    themes.insert(id.clone(), ["A1", "A2", "B"][t].to_string());
                    vectors.push(EmbeddingRecord {
                        id: id.clone(),
                        vector,
                    });
                    records.push(PublicationRecord {
                        id,
                        title,
                        abstract_text: sentences.join(" "),
                        year,
                        venue: venue.into(),
                        authors,
                        urls,
                        tldr,
                        citation_count,
                        is_survey: survey,
                        topic_ids: vec![sub.id.into(), main.id.into()],
                        references,
                    });
                }
            }
        }
    }

    let n_sub = entries
        .iter()
        .filter(|e| e.level == TopicLevel::Sub)
        .count();
    let expected = ExpectedCounts {
        nodes: BTreeMap::from([
            ("Author".to_string(), authors_seen.len()),
            ("Cluster".to_string(), 0),
            ("Publication".to_string(), records.len()),
            ("Topic".to_string(), entries.len()),
            ("Venue".to_string(), venues_seen.len()),
        ]),
        edges: BTreeMap::from([
            ("AUTHORED_BY".to_string(), authored_by),
            ("CITES".to_string(), cites),
            ("HAS_TOPIC".to_string(), 2 * records.len()),
            ("PUBLISHED_IN".to_string(), records.len()),
            ("SUBTOPIC_OF".to_string(), n_sub),
        ]),
    };
    DeskFixture {
        taxonomy: Taxonomy::new(entries).expect("fixture taxonomy is valid"),
        records,
        embeddings: Embeddings {
            dim: DESK_DIM,
            records: vectors,
        },
        expected,
        themes,
    }
}

/// Writes `taxonomy.json`, `publications.jsonl`, `embeddings.jsonl` and
/// `expected_counts.json` into `dir`.
pub fn write_desk_fixture(fixture: &DeskFixture, dir: &Path) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("taxonomy.json"), fixture.taxonomy.to_json())?;
    fs::write(dir.join("publications.jsonl"), to_jsonl(&fixture.records))?;
    fs::write(dir.join("embeddings.jsonl"), fixture.embeddings.to_jsonl())?;
    let mut counts = serde_json::to_string_pretty(&fixture.expected).expect("counts serialize");
    counts.push('\n');
    fs::write(dir.join("expected_counts.json"), counts)
}

/// Labelled points around per-topic centroids, for classifier threshold
/// tests. Topics are subtopics of a single main topic.
#[derive(Debug, Clone)]
pub struct TopicBlobs {
    pub taxonomy: Taxonomy,
    pub records: Vec<PublicationRecord>,
    pub embeddings: Embeddings,
    /// Unit centroid per subtopic id.
    pub centroids: BTreeMap<String, Vec<f64>>,
    pub sigma: f64,
    rng: ChaCha8Rng,
}

impl TopicBlobs {
    pub fn new(n_topics: usize, per_topic: usize, dim: usize, sigma: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, sigma).expect("valid sigma");
        let mut entries = vec![TaxonomyEntry {
            id: "blobs".into(),
            name: "Blobs".into(),
            definition: "Synthetic parent topic.".into(),
            level: TopicLevel::Main,
            parent_id: None,
        }];
        let mut centroids = BTreeMap::new();
        let mut records = Vec::new();
        let mut vectors = Vec::new();
        for t in 0..n_topics {
            let topic = format!("blob-{t:02}");
            entries.push(TaxonomyEntry {
                id: topic.clone(),
                name: format!("Blob {t}"),
                definition: format!("Synthetic topic {t}."),
                level: TopicLevel::Sub,
                parent_id: Some("blobs".into()),
            });
            let c = unit(&mut rng, dim);
            for i in 0..per_topic {
                let id = format!("b{t:02}-{i:03}");
                let v: Vec<f64> = c.iter().map(|x| x + noise.sample(&mut rng)).collect();
                vectors.push(EmbeddingRecord {
                    id: id.clone(),
                    vector: v,
                });
                records.push(PublicationRecord {
                    id,
                    title: format!("Blob paper {t}-{i}"),
                    abstract_text: "Synthetic.".into(),
                    year: 2020,
                    venue: String::new(),
                    authors: vec![],
                    urls: vec![],
                    tldr: None,
                    citation_count: None,
                    is_survey: false,
                    topic_ids: vec![topic.clone(), "blobs".into()],
                    references: vec![],
                });
            }
            centroids.insert(topic, c);
        }
        TopicBlobs {
            taxonomy: Taxonomy::new(entries).expect("blob taxonomy is valid"),
            records,
            embeddings: Embeddings {
                dim,
                records: vectors,
            },
            centroids,
            sigma,
            rng,
        }
    }

    /// A fresh point drawn like the corpus points of `topic`.
    pub fn near_query(&mut self, topic: &str) -> Vec<f64> {
        let noise = Normal::new(0.0, self.sigma).expect("valid sigma");
        let rng = &mut self.rng;
        self.centroids[topic]
            .iter()
            .map(|x| x + noise.sample(rng))
            .collect()
    }

    /// A direction orthogonal to every centroid whose cosine with every
    /// corpus point is below `max_cos`.
    pub fn far_query(&mut self, max_cos: f64) -> Vec<f64> {
        let dim = self.embeddings.dim;
        let mut basis: Vec<Vec<f64>> = Vec::new();
        for c in self.centroids.values() {
            let refs: Vec<&[f64]> = basis.iter().map(Vec::as_slice).collect();
            basis.push(orthogonalize(c.clone(), &refs));
        }
        let refs: Vec<&[f64]> = basis.iter().map(Vec::as_slice).collect();
        loop {
            let q = orthogonalize(unit(&mut self.rng, dim), &refs);
            let worst = self
                .embeddings
                .records
                .iter()
                .map(|r| dot(&q, &r.vector) / norm(&r.vector))
                .fold(f64::NEG_INFINITY, f64::max);
            if worst < max_cos {
                return q;
            }
        }
    }
}

/// `n_topics` topics of `per_topic` points with nested blob structure. When
/// `duplicates > 0`, the first topic gets that many identical points.
pub fn hierarchy_corpus(
    n_topics: usize,
    per_topic: usize,
    dim: usize,
    duplicates: usize,
    seed: u64,
) -> Vec<TopicMembers<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gauss = |rng: &mut ChaCha8Rng, sigma: f64| -> Vec<f64> {
        (0..dim)
            .map(|_| {
                let z: f64 = StandardNormal.sample(rng);
                sigma * z
            })
            .collect::<Vec<f64>>()
    };
    let mut out = Vec::new();
    for t in 0..n_topics {
        let centre = gauss(&mut rng, 20.0);
        let n_blobs = rng.gen_range(3..=6);
        let blobs: Vec<Vec<f64>> = (0..n_blobs)
            .map(|_| {
                let off = gauss(&mut rng, 3.0);
                centre.iter().zip(off).map(|(c, o)| c + o).collect()
            })
            .collect();
        let mut points = Vec::with_capacity(per_topic);
        let dup_point = gauss(&mut rng, 1.0);
        for i in 0..per_topic {
            let v: Vec<f64> = if t == 0 && i < duplicates {
                centre.iter().zip(&dup_point).map(|(c, d)| c + d).collect()
            } else {
                let b = &blobs[rng.gen_range(0..n_blobs)];
                let scale = [0.3, 1.0, 2.0][rng.gen_range(0..3)];
                let off = gauss(&mut rng, scale);
                b.iter().zip(off).map(|(c, o)| c + o).collect()
            };
            points.push((format!("h{t:02}-{i:04}"), v));
        }
        out.push((format!("topic-{t:02}"), points));
    }
    out
}
