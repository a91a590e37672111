//! Session lifecycle and the chat service shared by the CLI, the HTTP API
//! and the evaluation harness.

use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, Mutex, MutexGuard, RwLock, TryLockError};
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use uuid::Uuid;

use super::{open, respond, BotTurn, DialogueState, HistoryEntry, Services, SessionContext};
use crate::classify::{ClassifierConfig, QueryEncoder, TopicContext, TopicProvider};
use crate::graph::ScholarGraph;
use crate::index::VectorIndex;
use crate::ingest::Taxonomy;
use crate::llm::{CompareMode, TextGenerator};
use crate::segment::Sections;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SessionError {
    #[error("session {0} not found")]
    NotFound(String),
    #[error("session {0} is still processing the previous turn")]
    Busy(String),
}

/// How session ids are drawn. Seeded ids are still 122 random bits, but
/// reproducible across runs, which replay tests rely on.
pub enum IdSource {
    Random,
    Seeded(Box<Mutex<ChaCha20Rng>>),
}

impl IdSource {
    pub fn seeded(seed: u64) -> Self {
        IdSource::Seeded(Box::new(Mutex::new(ChaCha20Rng::seed_from_u64(seed))))
    }

    fn next(&self) -> String {
        match self {
            IdSource::Random => Uuid::new_v4().to_string(),
            IdSource::Seeded(rng) => {
                let mut bytes = [0u8; 16];
                lock(rng).fill_bytes(&mut bytes);
                uuid::Builder::from_random_bytes(bytes)
                    .into_uuid()
                    .to_string()
            }
        }
    }
}

fn lock<T>(m: &Mutex<T>) -> MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|e| e.into_inner())
}

struct Slot {
    ctx: Mutex<SessionContext>,
    last_seen: Mutex<Instant>,
}

/// Live sessions. Turns on one session are serialized by its lock; a turn
/// arriving while another is in progress is refused rather than queued
/// when submitted through [`SessionStore::try_with`].
pub struct SessionStore {
    sessions: RwLock<HashMap<String, Arc<Slot>>>,
    ttl: Duration,
    ids: IdSource,
}

impl SessionStore {
    pub fn new(ttl: Duration, ids: IdSource) -> Self {
        SessionStore {
            sessions: RwLock::new(HashMap::new()),
            ttl,
            ids,
        }
    }

    pub fn ttl(&self) -> Duration {
        self.ttl
    }

    pub fn len(&self) -> usize {
        self.sessions
            .read()
            .unwrap_or_else(|e| e.into_inner())
            .len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Stores a fresh greeting-state context under a new id.
    pub fn create(&self) -> SessionContext {
        let mut map = self.sessions.write().unwrap_or_else(|e| e.into_inner());
        let mut id = self.ids.next();
        while map.contains_key(&id) {
            id = self.ids.next();
        }
        let ctx = SessionContext::new(id.clone());
        map.insert(
            id,
            Arc::new(Slot {
                ctx: Mutex::new(ctx.clone()),
                last_seen: Mutex::new(Instant::now()),
            }),
        );
        ctx
    }

    fn slot(&self, id: &str) -> Result<Arc<Slot>, SessionError> {
        let found = self
            .sessions
            .read()
            .unwrap_or_else(|e| e.into_inner())
            .get(id)
            .cloned();
        let slot = found.ok_or_else(|| SessionError::NotFound(id.to_string()))?;
        if lock(&slot.last_seen).elapsed() > self.ttl {
            self.sessions
                .write()
                .unwrap_or_else(|e| e.into_inner())
                .remove(id);
            return Err(SessionError::NotFound(id.to_string()));
        }
        Ok(slot)
    }

    /// Runs `f` on the session, waiting for any turn in progress.
    pub fn with<R>(
        &self,
        id: &str,
        f: impl FnOnce(&mut SessionContext) -> R,
    ) -> Result<R, SessionError> {
        let slot = self.slot(id)?;
        let out = f(&mut lock(&slot.ctx));
        *lock(&slot.last_seen) = Instant::now();
        Ok(out)
    }

    /// Runs `f` on the session, or fails with `Busy` if a turn is in progress.
    pub fn try_with<R>(
        &self,
        id: &str,
        f: impl FnOnce(&mut SessionContext) -> R,
    ) -> Result<R, SessionError> {
        let slot = self.slot(id)?;
        let mut guard = match slot.ctx.try_lock() {
            Ok(g) => g,
            Err(TryLockError::Poisoned(e)) => e.into_inner(),
            Err(TryLockError::WouldBlock) => return Err(SessionError::Busy(id.to_string())),
        };
        let out = f(&mut guard);
        *lock(&slot.last_seen) = Instant::now();
        Ok(out)
    }

    pub fn get(&self, id: &str) -> Result<SessionContext, SessionError> {
        self.with(id, |ctx| ctx.clone())
    }

    /// Drops every session idle for longer than the TTL; returns how many.
    pub fn expire(&self) -> usize {
        let mut map = self.sessions.write().unwrap_or_else(|e| e.into_inner());
        let before = map.len();
        map.retain(|_, slot| lock(&slot.last_seen).elapsed() <= self.ttl);
        before - map.len()
    }
}

/// Everything a turn reads. Immutable once built and shared by all sessions.
pub struct Engine {
    pub graph: ScholarGraph,
    pub index: VectorIndex<f64>,
    pub taxonomy: Taxonomy,
    pub encoder: Box<dyn QueryEncoder>,
    pub topic_provider: Option<Box<dyn TopicProvider>>,
    pub classifier: ClassifierConfig,
    pub sections: BTreeMap<String, Sections>,
    pub llm: Box<dyn TextGenerator>,
    pub compare_mode: CompareMode,
}

impl Engine {
    pub fn services(&self) -> Services<'_> {
        Services {
            graph: &self.graph,
            topics: TopicContext {
                graph: &self.graph,
                index: &self.index,
                taxonomy: &self.taxonomy,
                encoder: self.encoder.as_ref(),
                provider: self.topic_provider.as_deref(),
                config: &self.classifier,
            },
            sections: &self.sections,
            llm: self.llm.as_ref(),
            compare_mode: self.compare_mode,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurnReply {
    pub session_id: String,
    pub state: DialogueState,
    pub bot_turn: BotTurn,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionSnapshot {
    pub session_id: String,
    pub state: DialogueState,
    pub history: Vec<HistoryEntry>,
}

fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

/// Sessions plus the engine they run against.
pub struct ChatService {
    pub engine: Arc<Engine>,
    pub store: SessionStore,
}

impl ChatService {
    pub fn new(engine: Arc<Engine>, store: SessionStore) -> Self {
        ChatService { engine, store }
    }

    /// Creates a session and plays the greeting turn.
    pub fn create(&self) -> TurnReply {
        let ctx = self.store.create();
        let services = self.engine.services();
        self.store
            .with(&ctx.session_id, |c| {
                let (next, turn) = open(c, &services, now_ms());
                *c = next;
                TurnReply {
                    session_id: c.session_id.clone(),
                    state: c.state,
                    bot_turn: turn,
                }
            })
            .expect("session created above")
    }

    /// Plays one user turn; refuses with `Busy` while another is running.
    pub fn post(&self, id: &str, text: &str) -> Result<TurnReply, SessionError> {
        let services = self.engine.services();
        self.store.try_with(id, |c| {
            let (next, turn) = respond(c, text, &services, now_ms());
            *c = next;
            TurnReply {
                session_id: c.session_id.clone(),
                state: c.state,
                bot_turn: turn,
            }
        })
    }

    /// Like [`ChatService::post`] but waits for a running turn to finish.
    pub fn post_queued(&self, id: &str, text: &str) -> Result<TurnReply, SessionError> {
        let services = self.engine.services();
        self.store.with(id, |c| {
            let (next, turn) = respond(c, text, &services, now_ms());
            *c = next;
            TurnReply {
                session_id: c.session_id.clone(),
                state: c.state,
                bot_turn: turn,
            }
        })
    }

    pub fn snapshot(&self, id: &str) -> Result<SessionSnapshot, SessionError> {
        self.store.with(id, |c| SessionSnapshot {
            session_id: c.session_id.clone(),
            state: c.state,
            history: c.history.clone(),
        })
    }
}
