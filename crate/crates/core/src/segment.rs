//! Sentence splitting and rhetorical labeling of abstracts.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use tracing::warn;

use crate::provider::ProviderError;
use crate::text::normalize_whitespace;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RhetoricalLabel {
    Background,
    Methods,
    Objectives,
    Results,
    Conclusions,
}

impl RhetoricalLabel {
    pub const ALL: [RhetoricalLabel; 5] = [
        RhetoricalLabel::Background,
        RhetoricalLabel::Methods,
        RhetoricalLabel::Objectives,
        RhetoricalLabel::Results,
        RhetoricalLabel::Conclusions,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            RhetoricalLabel::Background => "background",
            RhetoricalLabel::Methods => "methods",
            RhetoricalLabel::Objectives => "objectives",
            RhetoricalLabel::Results => "results",
            RhetoricalLabel::Conclusions => "conclusions",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL
            .into_iter()
            .find(|l| l.as_str().eq_ignore_ascii_case(s.trim()))
    }
}

impl fmt::Display for RhetoricalLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelSource {
    Heuristic,
    Provider,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledSentence {
    pub text: String,
    pub label: RhetoricalLabel,
    pub position: usize,
    pub source: LabelSource,
}

#[derive(Debug, Error)]
pub enum SegmentError {
    #[error("provider returned label {0:?}, which is not one of the five rhetorical labels")]
    UnknownLabel(String),
    #[error("provider returned {found} labels for {expected} sentences")]
    LabelCount { expected: usize, found: usize },
}

/// Words whose trailing period never ends a sentence.
const ABBREVIATIONS: &[&str] = &["al.", "cf.", "e.g.", "eq.", "fig.", "i.e.", "vs."];

/// Splits at ". ", "? " or "! " when the next character is an uppercase
/// letter or a digit, unless the period closes a known abbreviation.
/// Sentences joined by single spaces give back the whitespace-normalized
/// input.
pub fn split_sentences(abstract_text: &str) -> Vec<String> {
    let text = normalize_whitespace(abstract_text);
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut out = Vec::new();
    let mut start = 0;
    for w in 0..chars.len().saturating_sub(2) {
        let (i, c) = chars[w];
        if !matches!(c, '.' | '?' | '!') || chars[w + 1].1 != ' ' {
            continue;
        }
        let next = chars[w + 2].1;
        if !(next.is_uppercase() || next.is_ascii_digit()) {
            continue;
        }
        if c == '.' {
            let word_start = text[..i].rfind(' ').map_or(0, |p| p + 1);
            let word = text[word_start..=i]
                .trim_start_matches(|c: char| !c.is_alphanumeric())
                .to_lowercase();
            if ABBREVIATIONS.contains(&word.as_str()) {
                continue;
            }
        }
        out.push(text[start..=i].to_string());
        start = chars[w + 2].0;
    }
    if start < text.len() {
        out.push(text[start..].to_string());
    }
    out
}

const OBJECTIVE_CUES: &[&str] = &[
    "we aim",
    "our goal",
    "our aim",
    "this paper proposes",
    "this paper presents",
    "this paper introduces",
    "this paper investigates",
    "this work",
    "this study",
    "in this paper",
    "we propose",
    "we present",
    "we introduce",
    "we investigate",
    "we study",
    "we examine",
];

const RESULT_CUES: &[&str] = &[
    "results show",
    "results indicate",
    "experiments show",
    "evaluation show",
    "we achieve",
    "achieves",
    "reaches",
    "outperform",
    "improves",
    "improvement of",
    "gains",
    "f1 of",
    "accuracy of",
    "bleu of",
    "rouge",
    "correlates",
    "our analysis shows",
];

const CONCLUSION_CUES: &[&str] = &[
    "we conclude",
    "in conclusion",
    "overall",
    "these findings",
    "these results demonstrate",
    "future work",
    "we release",
    "thus offer",
];

const METHOD_CUES: &[&str] = &[
    "we use",
    "we train",
    "we apply",
    "we fine-tune",
    "we collect",
    "we prompt",
    "is trained",
    "are trained",
    "are generated",
    "is encoded",
    "are scored",
    "are ranked",
];

fn cue_label(sentence: &str) -> Option<RhetoricalLabel> {
    let s = sentence.to_lowercase();
    let has = |cues: &[&str]| cues.iter().any(|c| s.contains(c));
    if has(OBJECTIVE_CUES) {
        Some(RhetoricalLabel::Objectives)
    } else if has(RESULT_CUES) {
        Some(RhetoricalLabel::Results)
    } else if has(CONCLUSION_CUES) {
        Some(RhetoricalLabel::Conclusions)
    } else if has(METHOD_CUES) {
        Some(RhetoricalLabel::Methods)
    } else {
        None
    }
}

/// Labels every sentence: cue phrases first (objectives, results,
/// conclusions, methods in that order), then position. An uncued first
/// sentence is background, an uncued last sentence is conclusions and
/// anything else uncued is methods.
pub fn label_heuristic(sentences: &[String]) -> Vec<LabeledSentence> {
    let last = sentences.len().saturating_sub(1);
    sentences
        .iter()
        .enumerate()
        .map(|(position, text)| {
            let label = cue_label(text).unwrap_or(if position == 0 {
                RhetoricalLabel::Background
            } else if position == last {
                RhetoricalLabel::Conclusions
            } else {
                RhetoricalLabel::Methods
            });
            LabeledSentence {
                text: text.clone(),
                label,
                position,
                source: LabelSource::Heuristic,
            }
        })
        .collect()
}

/// External sentence classifier.
pub trait SentenceLabeler: Send + Sync {
    fn label(&self, sentences: &[String]) -> Result<Vec<String>, ProviderError>;
}

/// Labels from `provider`; unreachable providers fall back to the heuristic.
pub fn label_via_provider(
    sentences: &[String],
    provider: &dyn SentenceLabeler,
) -> Result<Vec<LabeledSentence>, SegmentError> {
    let labels = match provider.label(sentences) {
        Ok(labels) => labels,
        Err(e) => {
            warn!(error = %e, "sentence labeler failed; using heuristic labels");
            return Ok(label_heuristic(sentences));
        }
    };
    if labels.len() != sentences.len() {
        return Err(SegmentError::LabelCount {
            expected: sentences.len(),
            found: labels.len(),
        });
    }
    sentences
        .iter()
        .zip(labels)
        .enumerate()
        .map(|(position, (text, raw))| {
            let label = RhetoricalLabel::parse(&raw).ok_or(SegmentError::UnknownLabel(raw))?;
            Ok(LabeledSentence {
                text: text.clone(),
                label,
                position,
                source: LabelSource::Provider,
            })
        })
        .collect()
}

/// Heuristic segmentation of a whole abstract.
pub fn segment_abstract(abstract_text: &str) -> Vec<LabeledSentence> {
    label_heuristic(&split_sentences(abstract_text))
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Sections {
    pub objectives: String,
    pub results: String,
}

/// Objective and result sentences, each joined in position order.
pub fn extract_sections(labeled: &[LabeledSentence]) -> Sections {
    let mut sorted: Vec<&LabeledSentence> = labeled.iter().collect();
    sorted.sort_by_key(|s| s.position);
    let join = |want: RhetoricalLabel| {
        sorted
            .iter()
            .filter(|s| s.label == want)
            .map(|s| s.text.as_str())
            .collect::<Vec<_>>()
            .join(" ")
    };
    Sections {
        objectives: join(RhetoricalLabel::Objectives),
        results: join(RhetoricalLabel::Results),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn s(items: &[&str]) -> Vec<String> {
        items.iter().map(|x| x.to_string()).collect()
    }

    #[test]
    fn splitting() {
        assert_eq!(
            split_sentences("We do X. We find Y."),
            s(&["We do X.", "We find Y."])
        );
        assert_eq!(
            split_sentences("Smith et al. propose X. It works."),
            s(&["Smith et al. propose X.", "It works."])
        );
        assert_eq!(
            split_sentences("Models (e.g. BERT) help. See Fig. 3 for details."),
            s(&["Models (e.g. BERT) help.", "See Fig. 3 for details."])
        );
        assert!(split_sentences("").is_empty());
        assert_eq!(
            split_sentences("Is it? 42 is. ok."),
            s(&["Is it?", "42 is. ok."])
        );
    }

    #[test]
    fn cue_examples() {
        let one = label_heuristic(&s(&["This paper proposes X."]));
        assert_eq!(one[0].label, RhetoricalLabel::Objectives);
        let three = label_heuristic(&s(&[
            "NLP is important.",
            "We propose X.",
            "Results show 90% accuracy.",
        ]));
        let labels: Vec<_> = three.iter().map(|l| l.label).collect();
        assert_eq!(
            labels,
            [
                RhetoricalLabel::Background,
                RhetoricalLabel::Objectives,
                RhetoricalLabel::Results
            ]
        );
    }

    struct Fixed(Result<Vec<String>, ()>);

    impl SentenceLabeler for Fixed {
        fn label(&self, _: &[String]) -> Result<Vec<String>, ProviderError> {
            self.0
                .clone()
                .map_err(|_| ProviderError::Unavailable("down".into()))
        }
    }

    #[test]
    fn provider_paths() {
        let sents = s(&["A.", "B."]);
        let ok = label_via_provider(&sents, &Fixed(Ok(s(&["objectives", "results"])))).unwrap();
        assert!(ok.iter().all(|l| l.source == LabelSource::Provider));
        assert_eq!(ok[1].label, RhetoricalLabel::Results);
        assert!(matches!(
            label_via_provider(&sents, &Fixed(Ok(s(&["abstract", "results"])))),
            Err(SegmentError::UnknownLabel(_))
        ));
        let down = label_via_provider(&sents, &Fixed(Err(()))).unwrap();
        assert!(down.iter().all(|l| l.source == LabelSource::Heuristic));
    }

    #[test]
    fn sections_in_position_order() {
        let mk = |text: &str, label, position| LabeledSentence {
            text: text.into(),
            label,
            position,
            source: LabelSource::Heuristic,
        };
        let labeled = vec![
            mk("O4.", RhetoricalLabel::Objectives, 4),
            mk("O1.", RhetoricalLabel::Objectives, 1),
            mk("M.", RhetoricalLabel::Methods, 3),
            mk("O2.", RhetoricalLabel::Objectives, 2),
        ];
        let sec = extract_sections(&labeled);
        assert_eq!(sec.objectives, "O1. O2. O4.");
        assert_eq!(sec.results, "");
    }

    proptest! {
        #[test]
        fn split_reconstructs_and_labels_total(text in "[A-Za-z0-9 .?!,]{0,200}") {
            let sentences = split_sentences(&text);
            prop_assert_eq!(sentences.join(" "), normalize_whitespace(&text));
            prop_assert!(sentences.iter().all(|s| !s.is_empty()));
            let labeled = label_heuristic(&sentences);
            prop_assert_eq!(labeled.len(), sentences.len());
            for (i, l) in labeled.iter().enumerate() {
                prop_assert_eq!(l.position, i);
            }
        }
    }
}
