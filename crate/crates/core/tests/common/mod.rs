#![allow(dead_code)]

use std::collections::HashMap;
use std::sync::Arc;
use std::time::Duration;

use scholarchat_core::classify::ClassifierConfig;
use scholarchat_core::cluster::ClusteringParams;
use scholarchat_core::dialogue::{ChatService, Engine, IdSource, SessionStore};
use scholarchat_core::llm::{CompareMode, MissPolicy, MockGenerator};
use scholarchat_core::snapshot::{EngineParts, Snapshot};
use scholarchat_core::synth::{desk_fixture, DESK_SEED};

/// The desk fixture after ingest, clustering and segmentation.
pub fn desk_snapshot() -> Snapshot {
    let f = desk_fixture(DESK_SEED);
    let mut s = Snapshot::build(f.records, f.taxonomy, &f.embeddings).unwrap();
    s.cluster(&ClusteringParams::default()).unwrap();
    s.segment(None).unwrap();
    s
}

pub fn desk_engine() -> Engine {
    desk_snapshot().into_engine(EngineParts {
        encoder: None,
        topic_provider: None,
        classifier: ClassifierConfig::default(),
        llm: Box::new(MockGenerator::new(HashMap::new(), MissPolicy::Digest)),
        compare_mode: CompareMode::Single,
    })
}

pub fn desk_service() -> ChatService {
    ChatService::new(
        Arc::new(desk_engine()),
        SessionStore::new(Duration::from_secs(600), IdSource::seeded(1)),
    )
}
