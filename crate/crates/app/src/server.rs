//! The chat API.
//!
//! Turns run on the blocking pool: they may wait on the text generator. A
//! turn posted while the same session is still answering is refused with 409.

use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Duration;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, State};
use axum::http::{HeaderValue, Method, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;
use tower_http::cors::{AllowOrigin, Any, CorsLayer};
use tracing::info;

use scholarchat_core::dialogue::{ChatService, IdSource, SessionError, SessionStore};
use scholarchat_core::ingest::{PublicationRecord, Taxonomy, TaxonomyEntry, TopicLevel};
use scholarchat_core::segment::Sections;
use scholarchat_core::snapshot::{EngineParts, Snapshot};

use crate::config::{AppConfig, ServerConfig};
use crate::error::AppError;

pub struct AppState {
    pub service: ChatService,
    records: BTreeMap<String, PublicationRecord>,
    topics: serde_json::Value,
    cluster_count: usize,
}

#[derive(Serialize)]
struct TopicNode<'a> {
    id: &'a str,
    name: &'a str,
    definition: &'a str,
    children: Vec<TopicNode<'a>>,
}

fn node<'a>(e: &'a TaxonomyEntry, children: Vec<TopicNode<'a>>) -> TopicNode<'a> {
    TopicNode {
        id: &e.id,
        name: &e.name,
        definition: &e.definition,
        children,
    }
}

fn topic_tree(taxonomy: &Taxonomy) -> serde_json::Value {
    let roots: Vec<TopicNode> = taxonomy
        .at_level(TopicLevel::Main)
        .map(|m| {
            let kids = taxonomy
                .children(&m.id)
                .into_iter()
                .map(|s| node(s, Vec::new()))
                .collect();
            node(m, kids)
        })
        .collect();
    json!({ "topics": roots })
}

impl AppState {
    /// Builds the serving state from a clustered snapshot, with providers
    /// and generator taken from `config`.
    pub fn new(snapshot: Snapshot, config: &AppConfig) -> Result<Self, AppError> {
        let parts = EngineParts {
            encoder: config.providers.encoder(),
            topic_provider: config.providers.topic_provider()?,
            classifier: config.classifier.clone(),
            llm: config.llm.generator()?,
            compare_mode: config.llm.compare_mode,
        };
        Self::with_parts(snapshot, &config.server, parts)
    }

    pub fn with_parts(
        snapshot: Snapshot,
        server: &ServerConfig,
        parts: EngineParts,
    ) -> Result<Self, AppError> {
        if snapshot.clusters.is_empty() {
            return Err(AppError::Input {
                path: None,
                message: "snapshot has no clusters; run the cluster stage first".into(),
            });
        }
        let records = snapshot
            .records
            .iter()
            .map(|r| (r.id.clone(), r.clone()))
            .collect();
        let topics = topic_tree(&snapshot.taxonomy);
        let cluster_count = snapshot.clusters.len();
        let engine = snapshot.into_engine(parts);
        let ids = match server.session_id_seed {
            Some(seed) => IdSource::seeded(seed),
            None => IdSource::Random,
        };
        let store = SessionStore::new(server.session_ttl(), ids);
        Ok(AppState {
            service: ChatService::new(Arc::new(engine), store),
            records,
            topics,
            cluster_count,
        })
    }
}

struct ApiError(StatusCode, String);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(json!({ "error": self.1 }))).into_response()
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        let status = match e {
            SessionError::NotFound(_) => StatusCode::NOT_FOUND,
            SessionError::Busy(_) => StatusCode::CONFLICT,
        };
        ApiError(status, e.to_string())
    }
}

fn body<T>(payload: Result<Json<T>, JsonRejection>) -> Result<T, ApiError> {
    payload
        .map(|Json(v)| v)
        .map_err(|e| ApiError(StatusCode::UNPROCESSABLE_ENTITY, e.body_text()))
}

async fn blocking<T: Send + 'static>(
    f: impl FnOnce() -> T + Send + 'static,
) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))
}

type Shared = State<Arc<AppState>>;

async fn create_session(State(app): Shared) -> Result<Response, ApiError> {
    let reply = blocking(move || app.service.create()).await?;
    Ok((StatusCode::CREATED, Json(reply)).into_response())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MessageBody {
    text: String,
}

async fn post_message(
    State(app): Shared,
    Path(id): Path<String>,
    payload: Result<Json<MessageBody>, JsonRejection>,
) -> Result<Response, ApiError> {
    let text = body(payload)?.text;
    let reply = blocking(move || app.service.post(&id, &text)).await??;
    Ok(Json(reply).into_response())
}

async fn get_session(State(app): Shared, Path(id): Path<String>) -> Result<Response, ApiError> {
    let snapshot = blocking(move || app.service.snapshot(&id)).await??;
    Ok(Json(snapshot).into_response())
}

#[derive(Serialize)]
struct PaperDetails<'a> {
    #[serde(flatten)]
    record: &'a PublicationRecord,
    sections: Option<&'a Sections>,
}

async fn get_paper(State(app): Shared, Path(id): Path<String>) -> Result<Response, ApiError> {
    let record = app
        .records
        .get(&id)
        .ok_or_else(|| ApiError(StatusCode::NOT_FOUND, format!("paper {id} not found")))?;
    let details = PaperDetails {
        record,
        sections: app.service.engine.sections.get(&id),
    };
    Ok(Json(details).into_response())
}

async fn get_topics(State(app): Shared) -> Json<serde_json::Value> {
    Json(app.topics.clone())
}

async fn health(State(app): Shared) -> Json<serde_json::Value> {
    Json(json!({
        "status": "ok",
        "corpus_size": app.records.len(),
        "cluster_count": app.cluster_count,
    }))
}

async fn not_found() -> ApiError {
    ApiError(StatusCode::NOT_FOUND, "no such route".into())
}

fn cors(origin: &str) -> Result<CorsLayer, AppError> {
    let layer = CorsLayer::new()
        .allow_methods([Method::GET, Method::POST])
        .allow_headers(Any);
    if origin == "*" {
        return Ok(layer.allow_origin(Any));
    }
    let value = HeaderValue::from_str(origin)
        .map_err(|_| AppError::Config(format!("invalid cors origin {origin:?}")))?;
    Ok(layer.allow_origin(AllowOrigin::exact(value)))
}

pub fn router(state: Arc<AppState>, cors_origin: &str) -> Result<Router, AppError> {
    Ok(Router::new()
        .route("/api/sessions", post(create_session))
        .route("/api/sessions/{id}", get(get_session))
        .route("/api/sessions/{id}/messages", post(post_message))
        .route("/api/papers/{id}", get(get_paper))
        .route("/api/topics", get(get_topics))
        .route("/health", get(health))
        .fallback(not_found)
        .layer(cors(cors_origin)?)
        .with_state(state))
}

/// Serves until `shutdown` resolves. Expired sessions are purged in the
/// background.
pub async fn serve(
    listener: tokio::net::TcpListener,
    state: Arc<AppState>,
    config: &AppConfig,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> Result<(), AppError> {
    let app = router(Arc::clone(&state), &config.server.cors_origin)?;
    let period =
        (config.server.session_ttl() / 4).clamp(Duration::from_secs(1), Duration::from_secs(60));
    let sweeper = tokio::spawn(async move {
        let mut tick = tokio::time::interval(period);
        loop {
            tick.tick().await;
            let purged = state.service.store.expire();
            if purged > 0 {
                info!(purged, "expired sessions removed");
            }
        }
    });
    let result = axum::serve(listener, app)
        .with_graceful_shutdown(shutdown)
        .await
        .map_err(|e| AppError::stage("serve", e));
    sweeper.abort();
    result
}
