use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{
    complete_timed, GenerationParams, LlmError, PromptName, PromptTemplate, TextGenerator,
};

/// Bound in place of any empty section.
pub const NOT_STATED: &str = "not stated in the abstract";

/// The parts of a paper the comparison prompt needs.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PaperSections {
    pub id: String,
    pub objectives: String,
    pub results: String,
    pub tldr: String,
}

/// One call with the full body, or one call per section.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CompareMode {
    #[default]
    Single,
    Split,
}

#[derive(Debug)]
pub struct CompareFailure {
    pub error: LlmError,
    /// Both TLDRs, ready to show instead of the comparison.
    pub fallback: String,
}

fn or_not_stated(s: &str) -> String {
    if s.trim().is_empty() {
        NOT_STATED.to_string()
    } else {
        s.to_string()
    }
}

fn bindings(a: &PaperSections, b: &PaperSections) -> BTreeMap<String, String> {
    [
        ("id_a", a.id.clone()),
        ("id_b", b.id.clone()),
        ("obj1", or_not_stated(&a.objectives)),
        ("obj2", or_not_stated(&b.objectives)),
        ("res1", or_not_stated(&a.results)),
        ("res2", or_not_stated(&b.results)),
        ("tldr1", or_not_stated(&a.tldr)),
        ("tldr2", or_not_stated(&b.tldr)),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect()
}

/// Renders the comparison prompt(s) for `a` and `b`.
pub fn comparison_prompts(a: &PaperSections, b: &PaperSections, mode: CompareMode) -> Vec<String> {
    let all = bindings(a, b);
    let templates = match mode {
        CompareMode::Single => vec![PromptTemplate::get(PromptName::ComparativeSummary)],
        CompareMode::Split => PromptTemplate::comparison_sections().to_vec(),
    };
    templates
        .iter()
        .map(|t| {
            let own: BTreeMap<String, String> = t
                .required_vars
                .iter()
                .map(|v| (v.clone(), all[v].clone()))
                .collect();
            t.render(&own)
                .expect("bindings cover every comparison variable")
        })
        .collect()
}

/// Generates the comparison text, returned verbatim. Split mode joins the
/// section answers with blank lines.
pub fn compare_papers(
    a: &PaperSections,
    b: &PaperSections,
    backend: &dyn TextGenerator,
    mode: CompareMode,
) -> Result<String, CompareFailure> {
    let mut parts = Vec::new();
    for prompt in comparison_prompts(a, b, mode) {
        match complete_timed(&prompt, &GenerationParams::COMPARISON, backend) {
            Ok(r) => parts.push(r.text),
            Err(error) => {
                return Err(CompareFailure {
                    error,
                    fallback: format!(
                        "TLDR of Paper {}: {}\nTLDR of Paper {}: {}",
                        a.id,
                        or_not_stated(&a.tldr),
                        b.id,
                        or_not_stated(&b.tldr)
                    ),
                })
            }
        }
    }
    Ok(parts.join("\n\n"))
}
