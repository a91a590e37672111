#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::Arc;

use scholarchat_app::config::AppConfig;
use scholarchat_app::server::{self, AppState};
use scholarchat_core::cluster::ClusteringParams;
use scholarchat_core::snapshot::Snapshot;
use scholarchat_core::synth::{desk_fixture, DESK_SEED};

pub fn repo_path(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../..")
        .join(rel)
}

/// The desk fixture, clustered and segmented, in memory.
pub fn desk_snapshot() -> Snapshot {
    let f = desk_fixture(DESK_SEED);
    let mut s = Snapshot::build(f.records, f.taxonomy, &f.embeddings).unwrap();
    s.cluster(&ClusteringParams::default()).unwrap();
    s.segment(None).unwrap();
    s
}

/// Serves `state` on an ephemeral port from a background thread and returns
/// the base URL. The server lives until the test process exits.
pub fn spawn(state: AppState, config: AppConfig) -> String {
    let (tx, rx) = std::sync::mpsc::channel();
    std::thread::spawn(move || {
        let rt = tokio::runtime::Runtime::new().unwrap();
        rt.block_on(async move {
            let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
            tx.send(listener.local_addr().unwrap()).unwrap();
            server::serve(listener, Arc::new(state), &config, std::future::pending())
                .await
                .unwrap();
        });
    });
    format!("http://{}", rx.recv().unwrap())
}

pub fn desk_server() -> String {
    let config = AppConfig::default();
    spawn(AppState::new(desk_snapshot(), &config).unwrap(), config)
}

pub fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_scholarchat"))
        .args(args)
        .env_remove("RUST_LOG")
        .output()
        .unwrap()
}

pub fn agent() -> ureq::Agent {
    ureq::AgentBuilder::new().build()
}

/// Status and JSON body of a response, whatever the status.
pub fn call(r: Result<ureq::Response, ureq::Error>) -> (u16, serde_json::Value) {
    let resp = match r {
        Ok(resp) => resp,
        Err(ureq::Error::Status(_, resp)) => resp,
        Err(e) => panic!("{e}"),
    };
    let status = resp.status();
    (status, resp.into_json().unwrap_or(serde_json::Value::Null))
}
