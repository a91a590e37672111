//! Blocking HTTP clients for the provider traits of `scholarchat-core`.
//!
//! Every client shares [`HttpConfig`]: a base URL, a per-attempt timeout and
//! a retry budget. Transport failures and 5xx answers are retried with
//! exponential backoff; other 4xx answers fail at once.

use std::thread;
use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use tracing::{debug, warn};

use scholarchat_core::classify::{QueryEncoder, TopicProvider};
use scholarchat_core::ingest::{MetadataProvider, PaperMetadata};
use scholarchat_core::llm::{GenerationParams, TextGenerator};
use scholarchat_core::provider::ProviderError;
use scholarchat_core::segment::SentenceLabeler;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HttpConfig {
    pub base_url: String,
    pub timeout_ms: u64,
    /// Attempts after the first one.
    pub retries: u32,
    /// Wait before the first retry; doubles on each further one.
    pub backoff_ms: u64,
}

impl Default for HttpConfig {
    fn default() -> Self {
        HttpConfig {
            base_url: String::new(),
            timeout_ms: 30_000,
            retries: 2,
            backoff_ms: 200,
        }
    }
}

impl HttpConfig {
    pub fn new(base_url: impl Into<String>) -> Self {
        HttpConfig {
            base_url: base_url.into(),
            ..Self::default()
        }
    }
}

/// JSON transport with the retry policy. Shareable across threads.
#[derive(Debug, Clone)]
pub struct JsonClient {
    agent: ureq::Agent,
    config: HttpConfig,
}

enum Attempt<T> {
    Done(T),
    Retry(String),
    Fail(ProviderError),
}

impl JsonClient {
    pub fn new(config: HttpConfig) -> Self {
        let agent = ureq::AgentBuilder::new()
            .timeout(Duration::from_millis(config.timeout_ms))
            .build();
        JsonClient { agent, config }
    }

    pub fn config(&self) -> &HttpConfig {
        &self.config
    }

    fn url(&self, path: &str) -> String {
        format!("{}{}", self.config.base_url.trim_end_matches('/'), path)
    }

    fn with_retries<T>(
        &self,
        url: &str,
        mut call: impl FnMut() -> Result<ureq::Response, Box<ureq::Error>>,
        mut accept: impl FnMut(ureq::Response) -> Result<T, ProviderError>,
        not_found: Option<T>,
    ) -> Result<T, ProviderError> {
        let mut not_found = not_found;
        let mut last = String::new();
        for attempt in 0..=self.config.retries {
            if attempt > 0 {
                let wait = self
                    .config
                    .backoff_ms
                    .saturating_mul(1 << (attempt - 1).min(16));
                debug!(url, attempt, wait_ms = wait, "retrying provider call");
                thread::sleep(Duration::from_millis(wait));
            }
            let outcome = match call().map_err(|e| *e) {
                Ok(resp) => match accept(resp) {
                    Ok(v) => Attempt::Done(v),
                    Err(e) => Attempt::Fail(e),
                },
                Err(ureq::Error::Status(404, _)) if not_found.is_some() => {
                    Attempt::Done(not_found.take().expect("checked above"))
                }
                Err(ureq::Error::Status(404, _)) => Attempt::Fail(ProviderError::NotFound),
                Err(ureq::Error::Status(code, _)) if code >= 500 => {
                    Attempt::Retry(format!("HTTP {code}"))
                }
                Err(ureq::Error::Status(code, resp)) => {
                    let body = resp.into_string().unwrap_or_default();
                    Attempt::Fail(ProviderError::InvalidResponse(format!(
                        "HTTP {code}: {body}"
                    )))
                }
                Err(ureq::Error::Transport(t)) => Attempt::Retry(t.to_string()),
            };
            match outcome {
                Attempt::Done(v) => return Ok(v),
                Attempt::Fail(e) => return Err(e),
                Attempt::Retry(reason) => {
                    warn!(url, attempt, %reason, "provider call failed");
                    last = reason;
                }
            }
        }
        Err(ProviderError::Unavailable(format!(
            "{url}: {last} after {} attempts",
            self.config.retries + 1
        )))
    }

    fn decode<R: DeserializeOwned>(resp: ureq::Response) -> Result<R, ProviderError> {
        resp.into_json()
            .map_err(|e| ProviderError::InvalidResponse(e.to_string()))
    }

    pub fn post<B: Serialize, R: DeserializeOwned>(
        &self,
        path: &str,
        body: &B,
    ) -> Result<R, ProviderError> {
        let url = self.url(path);
        let body = serde_json::to_value(body)
            .map_err(|e| ProviderError::InvalidResponse(e.to_string()))?;
        self.with_retries(
            &url,
            || {
                self.agent
                    .post(&url)
                    .send_json(body.clone())
                    .map_err(Box::new)
            },
            Self::decode,
            None,
        )
    }

    /// GET that maps 404 to `Ok(None)`.
    pub fn get_optional<R: DeserializeOwned>(
        &self,
        path: &str,
    ) -> Result<Option<R>, ProviderError> {
        let url = self.url(path);
        self.with_retries(
            &url,
            || self.agent.get(&url).call().map_err(Box::new),
            |r| Self::decode(r).map(Some),
            Some(None),
        )
    }
}

/// Body shape sent to the text-generation endpoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WireFormat {
    /// `POST <base>/generate {prompt, max_tokens, temperature}` → `{text}`.
    #[default]
    Plain,
    /// `POST <base>/chat/completions` with one user message; the answer is
    /// `choices[0].message.content`.
    OpenaiChat,
}

#[derive(Serialize)]
struct PlainRequest<'a> {
    prompt: &'a str,
    max_tokens: u32,
    temperature: f64,
}

#[derive(Deserialize)]
struct PlainResponse {
    text: String,
}

#[derive(Serialize)]
struct ChatMessage<'a> {
    role: &'a str,
    content: &'a str,
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: [ChatMessage<'a>; 1],
    max_tokens: u32,
    temperature: f64,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatContent,
}

#[derive(Deserialize)]
struct ChatContent {
    content: String,
}

pub struct HttpGenerator {
    client: JsonClient,
    wire: WireFormat,
    model: String,
}

impl HttpGenerator {
    /// `model` is only sent in the chat wire format.
    pub fn new(config: HttpConfig, wire: WireFormat, model: impl Into<String>) -> Self {
        HttpGenerator {
            client: JsonClient::new(config),
            wire,
            model: model.into(),
        }
    }
}

impl TextGenerator for HttpGenerator {
    fn complete(&self, prompt: &str, params: &GenerationParams) -> Result<String, ProviderError> {
        match self.wire {
            WireFormat::Plain => {
                let body = PlainRequest {
                    prompt,
                    max_tokens: params.max_tokens,
                    temperature: params.temperature,
                };
                let r: PlainResponse = self.client.post("/generate", &body)?;
                Ok(r.text)
            }
            WireFormat::OpenaiChat => {
                let body = ChatRequest {
                    model: &self.model,
                    messages: [ChatMessage {
                        role: "user",
                        content: prompt,
                    }],
                    max_tokens: params.max_tokens,
                    temperature: params.temperature,
                };
                let r: ChatResponse = self.client.post("/chat/completions", &body)?;
                r.choices
                    .into_iter()
                    .next()
                    .map(|c| c.message.content)
                    .ok_or_else(|| ProviderError::InvalidResponse("no choices".into()))
            }
        }
    }
}

/// `POST <base>/classify {text}` → `{label}`.
pub struct HttpTopicProvider(JsonClient);

impl HttpTopicProvider {
    pub fn new(config: HttpConfig) -> Self {
        HttpTopicProvider(JsonClient::new(config))
    }
}

#[derive(Serialize)]
struct TextBody<'a> {
    text: &'a str,
}

#[derive(Deserialize)]
struct LabelBody {
    label: String,
}

impl TopicProvider for HttpTopicProvider {
    fn classify(&self, text: &str) -> Result<String, ProviderError> {
        let r: LabelBody = self.0.post("/classify", &TextBody { text })?;
        Ok(r.label)
    }
}

/// `POST <base>/label {sentences}` → `{labels}`, one label per sentence.
pub struct HttpSentenceLabeler(JsonClient);

impl HttpSentenceLabeler {
    pub fn new(config: HttpConfig) -> Self {
        HttpSentenceLabeler(JsonClient::new(config))
    }
}

#[derive(Serialize)]
struct SentencesBody<'a> {
    sentences: &'a [String],
}

#[derive(Deserialize)]
struct LabelsBody {
    labels: Vec<String>,
}

impl SentenceLabeler for HttpSentenceLabeler {
    fn label(&self, sentences: &[String]) -> Result<Vec<String>, ProviderError> {
        let r: LabelsBody = self.0.post("/label", &SentencesBody { sentences })?;
        if r.labels.len() != sentences.len() {
            return Err(ProviderError::InvalidResponse(format!(
                "{} labels for {} sentences",
                r.labels.len(),
                sentences.len()
            )));
        }
        Ok(r.labels)
    }
}

/// `POST <base>/encode {text}` → `{vector}` in the publication embedding
/// space.
pub struct HttpQueryEncoder(JsonClient);

impl HttpQueryEncoder {
    pub fn new(config: HttpConfig) -> Self {
        HttpQueryEncoder(JsonClient::new(config))
    }
}

#[derive(Deserialize)]
struct VectorBody {
    vector: Vec<f64>,
}

impl QueryEncoder for HttpQueryEncoder {
    fn encode(&self, text: &str) -> Result<Option<Vec<f64>>, ProviderError> {
        let r: VectorBody = self.0.post("/encode", &TextBody { text })?;
        if r.vector.iter().any(|x| !x.is_finite()) {
            return Err(ProviderError::InvalidResponse("non-finite vector".into()));
        }
        Ok(Some(r.vector))
    }
}

/// `GET <base>/paper/{id}` → `{tldr, citationCount, references}`; 404 means
/// the provider does not know the paper.
pub struct HttpMetadata(JsonClient);

impl HttpMetadata {
    pub fn new(config: HttpConfig) -> Self {
        HttpMetadata(JsonClient::new(config))
    }
}

impl MetadataProvider for HttpMetadata {
    fn fetch(&self, id: &str) -> Result<Option<PaperMetadata>, ProviderError> {
        let encoded: String = id
            .bytes()
            .map(|b| match b {
                b'A'..=b'Z' | b'a'..=b'z' | b'0'..=b'9' | b'-' | b'_' | b'.' | b'~' | b':' => {
                    (b as char).to_string()
                }
                _ => format!("%{b:02X}"),
            })
            .collect();
        self.0.get_optional(&format!("/paper/{encoded}"))
    }
}
