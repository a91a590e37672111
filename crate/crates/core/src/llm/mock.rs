use std::collections::HashMap;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};

use sha2::{Digest, Sha256};

use super::{GenerationParams, TextGenerator};
use crate::provider::ProviderError;

/// Lowercase hex SHA-256 of the rendered prompt; the key of mock responses.
pub fn prompt_digest(prompt: &str) -> String {
    hex::encode(Sha256::digest(prompt.as_bytes()))
}

/// What the mock answers for a prompt it has no canned response for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MissPolicy {
    /// Fail like an unreachable endpoint.
    #[default]
    Error,
    /// Answer `mock-<first 12 hex digits of the digest>`.
    Digest,
    /// Answer with the prompt itself.
    Echo,
}

/// Deterministic generator answering from a digest→text map.
#[derive(Debug, Default)]
pub struct MockGenerator {
    responses: HashMap<String, String>,
    miss: MissPolicy,
    calls: AtomicUsize,
}

impl MockGenerator {
    pub fn new(responses: HashMap<String, String>, miss: MissPolicy) -> Self {
        MockGenerator {
            responses,
            miss,
            calls: AtomicUsize::new(0),
        }
    }

    /// Loads a JSON object mapping prompt digests to responses.
    pub fn from_file(path: impl AsRef<Path>, miss: MissPolicy) -> Result<Self, ProviderError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| ProviderError::Unavailable(format!("{}: {e}", path.display())))?;
        let responses = serde_json::from_str(&text)
            .map_err(|e| ProviderError::InvalidResponse(format!("{}: {e}", path.display())))?;
        Ok(Self::new(responses, miss))
    }

    /// Registers `text` as the answer to `prompt`.
    pub fn insert_prompt(&mut self, prompt: &str, text: impl Into<String>) {
        self.responses.insert(prompt_digest(prompt), text.into());
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::Relaxed)
    }
}

impl TextGenerator for MockGenerator {
    fn complete(&self, prompt: &str, _params: &GenerationParams) -> Result<String, ProviderError> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        let digest = prompt_digest(prompt);
        if let Some(text) = self.responses.get(&digest) {
            return Ok(text.clone());
        }
        match self.miss {
            MissPolicy::Error => Err(ProviderError::Unavailable(format!(
                "no mock response for prompt {digest}"
            ))),
            MissPolicy::Digest => Ok(format!("mock-{}", &digest[..12])),
            MissPolicy::Echo => Ok(prompt.to_string()),
        }
    }
}
