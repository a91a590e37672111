//! Application configuration: a TOML file, then `LLM_*` variables, then
//! `APP_*` overrides.
//!
//! `APP_<SECTION>__<KEY>` sets `key` in `[section]`, e.g.
//! `APP_SERVER__PORT=9000`. Values are read as TOML scalars when they parse
//! as one and as strings otherwise. Unknown keys are rejected whether they
//! come from the file or the environment.

use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use scholarchat_core::classify::{
    CannedTopicProvider, ClassifierConfig, QueryEncoder, TopicProvider,
};
use scholarchat_core::cluster::ClusteringParams;
use scholarchat_core::llm::{CompareMode, MissPolicy, MockGenerator, TextGenerator};
use scholarchat_core::segment::SentenceLabeler;
use scholarchat_providers::{
    HttpConfig, HttpGenerator, HttpMetadata, HttpQueryEncoder, HttpSentenceLabeler,
    HttpTopicProvider, WireFormat,
};

use crate::error::AppError;

pub const ENV_PREFIX: &str = "APP_";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AppConfig {
    pub data: DataPaths,
    pub classifier: ClassifierConfig,
    pub clustering: ClusteringParams,
    pub llm: LlmConfig,
    pub providers: ProviderConfig,
    pub server: ServerConfig,
}

/// Inputs of the pipeline; command-line flags take precedence.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataPaths {
    pub corpus: Option<PathBuf>,
    pub taxonomy: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    pub snapshot: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LlmMode {
    Live,
    #[default]
    Mock,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MockMiss {
    Error,
    #[default]
    Digest,
    Echo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LlmConfig {
    pub mode: LlmMode,
    pub base_url: String,
    pub timeout_ms: u64,
    pub retries: u32,
    pub backoff_ms: u64,
    pub wire: WireFormat,
    /// Sent only with the chat wire format.
    pub model: String,
    /// JSON map from prompt SHA-256 to response text.
    pub mock_responses_path: Option<PathBuf>,
    /// Mock answer for prompts missing from the map.
    pub mock_miss: MockMiss,
    pub compare_mode: CompareMode,
}

impl Default for LlmConfig {
    fn default() -> Self {
        let http = HttpConfig::default();
        LlmConfig {
            mode: LlmMode::Mock,
            base_url: String::new(),
            timeout_ms: http.timeout_ms,
            retries: http.retries,
            backoff_ms: http.backoff_ms,
            wire: WireFormat::Plain,
            model: String::new(),
            mock_responses_path: None,
            mock_miss: MockMiss::Digest,
            compare_mode: CompareMode::Single,
        }
    }
}

impl LlmConfig {
    pub fn generator(&self) -> Result<Box<dyn TextGenerator>, AppError> {
        match self.mode {
            LlmMode::Live => Ok(Box::new(HttpGenerator::new(
                HttpConfig {
                    base_url: self.base_url.clone(),
                    timeout_ms: self.timeout_ms,
                    retries: self.retries,
                    backoff_ms: self.backoff_ms,
                },
                self.wire,
                self.model.clone(),
            ))),
            LlmMode::Mock => {
                let miss = match self.mock_miss {
                    MockMiss::Error => MissPolicy::Error,
                    MockMiss::Digest => MissPolicy::Digest,
                    MockMiss::Echo => MissPolicy::Echo,
                };
                let mock = match &self.mock_responses_path {
                    Some(path) => MockGenerator::from_file(crate::error::require(path)?, miss)
                        .map_err(|e| AppError::input(path, e))?,
                    None => MockGenerator::new(Default::default(), miss),
                };
                Ok(Box::new(mock))
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProviderConfig {
    /// Main-topic classifier endpoint.
    pub classifier: Option<HttpConfig>,
    /// JSON map `{query text: label}` used instead of a classifier endpoint.
    pub classifier_canned: Option<PathBuf>,
    /// Query embedding endpoint; the keyword encoder is used without one.
    pub encoder: Option<HttpConfig>,
    pub labeler: Option<HttpConfig>,
    pub metadata: Option<HttpConfig>,
    pub enrich_max_in_flight: usize,
}

impl ProviderConfig {
    pub fn topic_provider(&self) -> Result<Option<Box<dyn TopicProvider>>, AppError> {
        if let Some(http) = &self.classifier {
            return Ok(Some(Box::new(HttpTopicProvider::new(http.clone()))));
        }
        match &self.classifier_canned {
            Some(path) => {
                let canned = CannedTopicProvider::from_file(crate::error::require(path)?)
                    .map_err(|e| AppError::input(path, e))?;
                Ok(Some(Box::new(canned)))
            }
            None => Ok(None),
        }
    }

    pub fn encoder(&self) -> Option<Box<dyn QueryEncoder>> {
        self.encoder
            .as_ref()
            .map(|c| Box::new(HttpQueryEncoder::new(c.clone())) as Box<dyn QueryEncoder>)
    }

    pub fn labeler(&self) -> Result<Box<dyn SentenceLabeler>, AppError> {
        let c = self
            .labeler
            .as_ref()
            .ok_or_else(|| AppError::Config("providers.labeler is not configured".into()))?;
        Ok(Box::new(HttpSentenceLabeler::new(c.clone())))
    }

    pub fn metadata(&self) -> Result<HttpMetadata, AppError> {
        let c = self
            .metadata
            .as_ref()
            .ok_or_else(|| AppError::Config("providers.metadata is not configured".into()))?;
        Ok(HttpMetadata::new(c.clone()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ServerConfig {
    pub bind: String,
    pub port: u16,
    /// Allowed browser origin; "*" allows any.
    pub cors_origin: String,
    pub session_ttl_secs: u64,
    /// Makes session ids reproducible. Only for replay tests.
    pub session_id_seed: Option<u64>,
}

impl Default for ServerConfig {
    fn default() -> Self {
        ServerConfig {
            bind: "127.0.0.1".into(),
            port: 8080,
            cors_origin: "*".into(),
            session_ttl_secs: 1800,
            session_id_seed: None,
        }
    }
}

impl ServerConfig {
    pub fn session_ttl(&self) -> Duration {
        Duration::from_secs(self.session_ttl_secs)
    }
}

fn scalar(raw: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .filter(|v| !v.is_table() && !v.is_array())
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

fn set(root: &mut toml::Table, path: &[String], value: toml::Value) -> Result<(), AppError> {
    let (last, parents) = path.split_last().expect("non-empty path");
    let mut table = root;
    for key in parents {
        table = table
            .entry(key.clone())
            .or_insert_with(|| toml::Value::Table(Default::default()))
            .as_table_mut()
            .ok_or_else(|| AppError::Config(format!("{key} is not a section")))?;
    }
    table.insert(last.clone(), value);
    Ok(())
}

impl AppConfig {
    /// Reads `path` (defaults when `None`) and applies overrides from `env`.
    pub fn load(
        path: Option<&Path>,
        env: impl IntoIterator<Item = (String, String)>,
    ) -> Result<Self, AppError> {
        let mut root: toml::Table = match path {
            Some(p) => {
                let text = std::fs::read_to_string(crate::error::require(p)?)
                    .map_err(|e| AppError::input(p, e))?;
                toml::from_str(&text).map_err(|e| AppError::input(p, e.message()))?
            }
            None => toml::Table::new(),
        };
        let mut env: Vec<(String, String)> = env.into_iter().collect();
        env.sort();
        for (key, raw) in &env {
            let path: Vec<String> = match key.as_str() {
                "LLM_BASE_URL" => vec!["llm".into(), "base_url".into()],
                "LLM_TIMEOUT_MS" => vec!["llm".into(), "timeout_ms".into()],
                "LLM_MODE" => vec!["llm".into(), "mode".into()],
                "MOCK_RESPONSES_PATH" => vec!["llm".into(), "mock_responses_path".into()],
                _ => continue,
            };
            set(&mut root, &path, scalar(raw))?;
        }
        for (key, raw) in &env {
            let Some(rest) = key.strip_prefix(ENV_PREFIX) else {
                continue;
            };
            let path: Vec<String> = rest.split("__").map(str::to_lowercase).collect();
            if path.iter().any(String::is_empty) {
                return Err(AppError::Config(format!("malformed override {key}")));
            }
            set(&mut root, &path, scalar(raw))?;
        }
        let config: AppConfig = toml::Value::Table(root)
            .try_into()
            .map_err(|e: toml::de::Error| AppError::Config(e.message().to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), AppError> {
        self.classifier
            .validate()
            .map_err(|e| AppError::Config(e.to_string()))?;
        self.clustering
            .validate()
            .map_err(|e| AppError::Config(e.to_string()))?;
        if self.llm.mode == LlmMode::Live && self.llm.base_url.is_empty() {
            return Err(AppError::Config(
                "llm.base_url is required in live mode".into(),
            ));
        }
        if self.server.session_ttl_secs == 0 {
            return Err(AppError::Config(
                "server.session_ttl_secs must be > 0".into(),
            ));
        }
        Ok(())
    }
}
