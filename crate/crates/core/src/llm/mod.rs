//! Prompt rendering and text-generation backends.

mod compare;
mod mock;
mod prompts;

use std::collections::BTreeMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::provider::ProviderError;

pub use compare::{
    compare_papers, comparison_prompts, CompareFailure, CompareMode, PaperSections, NOT_STATED,
};
pub use mock::{prompt_digest, MissPolicy, MockGenerator};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RenderError {
    #[error("unbound variable {0}")]
    Unbound(String),
    #[error("unknown variable {0}")]
    Unknown(String),
}

#[derive(Debug, Error)]
pub enum LlmError {
    #[error(transparent)]
    Render(#[from] RenderError),
    #[error("text generation failed: {0}")]
    Backend(#[from] ProviderError),
    #[error("invalid generation parameters: {0}")]
    Params(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptName {
    ClusterName,
    ComparativeSummary,
    TopicClassification,
}

/// Comparison body split into its three stacked sections.
const COMPARE_SECTIONS: [&str; 3] = [
    prompts::COMPARE_OBJECTIVES,
    prompts::COMPARE_RESULTS,
    prompts::COMPARE_TLDR,
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    pub name: PromptName,
    pub body: String,
    /// Placeholder names in order of first appearance.
    pub required_vars: Vec<String>,
}

impl PromptTemplate {
    pub fn new(name: PromptName, body: impl Into<String>) -> Self {
        let body = body.into();
        let mut required_vars = Vec::new();
        for (_, var) in placeholders(&body) {
            if !required_vars.iter().any(|v| v == var) {
                required_vars.push(var.to_string());
            }
        }
        PromptTemplate {
            name,
            body,
            required_vars,
        }
    }

    pub fn get(name: PromptName) -> Self {
        let body = match name {
            PromptName::ClusterName => prompts::CLUSTER_NAME.to_string(),
            PromptName::ComparativeSummary => COMPARE_SECTIONS.join("\n"),
            PromptName::TopicClassification => prompts::TOPIC_CLASSIFICATION.to_string(),
        };
        Self::new(name, body)
    }

    /// The comparison template's three sections as separate templates.
    pub fn comparison_sections() -> [PromptTemplate; 3] {
        COMPARE_SECTIONS.map(|b| Self::new(PromptName::ComparativeSummary, b))
    }

    pub fn render(&self, bindings: &BTreeMap<String, String>) -> Result<String, RenderError> {
        render(&self.body, bindings)
    }
}

/// `(byte offset of '{', name)` for every `{name}` with no brace inside.
fn placeholders(body: &str) -> Vec<(usize, &str)> {
    let mut out = Vec::new();
    let mut rest = 0;
    while let Some(open) = body[rest..].find('{').map(|i| i + rest) {
        let after = &body[open + 1..];
        match after.find(['{', '}']) {
            Some(close) if after.as_bytes()[close] == b'}' && close > 0 => {
                out.push((open, &after[..close]));
                rest = open + close + 2;
            }
            _ => rest = open + 1,
        }
    }
    out
}

/// Single-pass substitution. Bound values are inserted verbatim and never
/// rescanned; the template text itself is left untouched.
pub fn render(body: &str, bindings: &BTreeMap<String, String>) -> Result<String, RenderError> {
    let found = placeholders(body);
    for (_, var) in &found {
        if !bindings.contains_key(*var) {
            return Err(RenderError::Unbound(var.to_string()));
        }
    }
    for key in bindings.keys() {
        if !found.iter().any(|(_, v)| v == key) {
            return Err(RenderError::Unknown(key.clone()));
        }
    }
    let mut out = String::with_capacity(body.len());
    let mut last = 0;
    for (start, var) in found {
        out.push_str(&body[last..start]);
        out.push_str(&bindings[var]);
        last = start + var.len() + 2;
    }
    out.push_str(&body[last..]);
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationParams {
    pub max_tokens: u32,
    pub temperature: f64,
}

impl GenerationParams {
    pub const COMPARISON: GenerationParams = GenerationParams {
        max_tokens: 512,
        temperature: 0.3,
    };
    pub const CLUSTER_NAME: GenerationParams = GenerationParams {
        max_tokens: 64,
        temperature: 0.7,
    };
}

/// A text-generation endpoint.
pub trait TextGenerator: Send + Sync {
    fn complete(&self, prompt: &str, params: &GenerationParams) -> Result<String, ProviderError>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRequest {
    pub template: PromptName,
    pub bindings: BTreeMap<String, String>,
    pub params: GenerationParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationResponse {
    pub text: String,
    pub latency_ms: u64,
}

/// Renders the request's template and sends it to `backend`.
pub fn generate(
    request: &GenerationRequest,
    backend: &dyn TextGenerator,
) -> Result<GenerationResponse, LlmError> {
    let prompt = PromptTemplate::get(request.template).render(&request.bindings)?;
    complete_timed(&prompt, &request.params, backend)
}

pub(crate) fn complete_timed(
    prompt: &str,
    params: &GenerationParams,
    backend: &dyn TextGenerator,
) -> Result<GenerationResponse, LlmError> {
    // Negated so that NaN is rejected too.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    if !(params.temperature >= 0.0) {
        return Err(LlmError::Params("temperature must be >= 0".into()));
    }
    let started = Instant::now();
    let text = backend.complete(prompt, params)?;
    Ok(GenerationResponse {
        text,
        latency_ms: started.elapsed().as_millis() as u64,
    })
}
