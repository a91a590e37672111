//! The chat API served over a real socket.

mod common;

use std::sync::Arc;
use std::thread;
use std::time::Duration;

use serde_json::json;

use common::{agent, call, desk_server, desk_snapshot, spawn};
use scholarchat_app::client::HttpChatTarget;
use scholarchat_app::config::AppConfig;
use scholarchat_app::server::AppState;
use scholarchat_core::classify::{ClassifierConfig, QueryEncoder};
use scholarchat_core::eval::{run_script, ConversationScript};
use scholarchat_core::llm::{CompareMode, MissPolicy, MockGenerator};
use scholarchat_core::provider::ProviderError;
use scholarchat_core::snapshot::EngineParts;

#[test]
fn session_lifecycle() {
    let base = desk_server();
    let a = agent();
    let (status, created) = call(a.post(&format!("{base}/api/sessions")).send_json(json!({})));
    assert_eq!(status, 201);
    assert_eq!(created["state"], "S2_goal_elicitation");
    assert!(!created["bot_turn"]["messages"]
        .as_array()
        .unwrap()
        .is_empty());
    let id = created["session_id"].as_str().unwrap();

    let (status, turn) = call(
        a.post(&format!("{base}/api/sessions/{id}/messages"))
            .send_json(json!({"text": "I want to study how people express their feelings on social media."})),
    );
    assert_eq!(status, 200);
    assert_eq!(turn["state"], "S3_topic_selection");
    let suggestions: Vec<&str> = turn["bot_turn"]["suggestions"]
        .as_array()
        .unwrap()
        .iter()
        .map(|s| s.as_str().unwrap())
        .collect();
    assert!(suggestions.contains(&"Emotion Analysis"), "{suggestions:?}");

    let (status, session) = call(a.get(&format!("{base}/api/sessions/{id}")).call());
    assert_eq!(status, 200);
    assert_eq!(session["state"], "S3_topic_selection");
    assert_eq!(session["history"].as_array().unwrap().len(), 3);
}

#[test]
fn error_statuses() {
    let base = desk_server();
    let a = agent();
    assert_eq!(
        call(a.get(&format!("{base}/api/papers/unknown")).call()).0,
        404
    );
    assert_eq!(
        call(a.get(&format!("{base}/api/sessions/nope")).call()).0,
        404
    );
    assert_eq!(
        call(
            a.post(&format!("{base}/api/sessions/nope/messages"))
                .send_json(json!({"text": "hi"}))
        )
        .0,
        404
    );
    assert_eq!(call(a.get(&format!("{base}/nowhere")).call()).0, 404);
    let (_, created) = call(a.post(&format!("{base}/api/sessions")).send_json(json!({})));
    let url = format!(
        "{base}/api/sessions/{}/messages",
        created["session_id"].as_str().unwrap()
    );
    for bad in [
        a.post(&url)
            .set("Content-Type", "application/json")
            .send_string("{not json"),
        a.post(&url).send_json(json!({"txt": "hi"})),
        a.post(&url).send_json(json!({"text": 5})),
        a.post(&url).send_string("text=hi"),
    ] {
        let (status, body) = call(bad);
        assert_eq!(status, 422, "{body}");
        assert!(body["error"].is_string());
    }
}

#[test]
fn papers_topics_health_and_cors() {
    let base = desk_server();
    let a = agent();
    let (status, paper) = call(a.get(&format!("{base}/api/papers/p0001")).call());
    assert_eq!(status, 200);
    assert_eq!(paper["id"], "p0001");
    assert!(paper["authors"].is_array() && paper["urls"].is_array());
    assert!(paper["sections"]["objectives"].is_string());

    let (_, topics) = call(a.get(&format!("{base}/api/topics")).call());
    let mains = topics["topics"].as_array().unwrap();
    assert_eq!(mains.len(), 4);
    assert!(mains
        .iter()
        .all(|m| m["children"].as_array().unwrap().len() == 3));

    let (status, health) = call(a.get(&format!("{base}/health")).call());
    assert_eq!(status, 200);
    assert_eq!(
        health,
        json!({"status": "ok", "corpus_size": 200, "cluster_count": 48})
    );

    let resp = a
        .get(&format!("{base}/health"))
        .set("Origin", "http://localhost:5173")
        .call()
        .unwrap();
    assert_eq!(resp.header("access-control-allow-origin"), Some("*"));
}

/// Encoder that takes its time and matches nothing.
struct SlowEncoder;

impl QueryEncoder for SlowEncoder {
    fn encode(&self, _text: &str) -> Result<Option<Vec<f64>>, ProviderError> {
        thread::sleep(Duration::from_millis(400));
        Ok(None)
    }
}

#[test]
fn concurrent_turn_on_one_session_is_refused() {
    let config = AppConfig::default();
    let parts = EngineParts {
        encoder: Some(Box::new(SlowEncoder)),
        topic_provider: None,
        classifier: ClassifierConfig::default(),
        llm: Box::new(MockGenerator::new(Default::default(), MissPolicy::Digest)),
        compare_mode: CompareMode::Single,
    };
    let state = AppState::with_parts(desk_snapshot(), &config.server, parts).unwrap();
    let base = Arc::new(spawn(state, config));
    let (_, created) = call(
        agent()
            .post(&format!("{base}/api/sessions"))
            .send_json(json!({})),
    );
    let url = Arc::new(format!(
        "{base}/api/sessions/{}/messages",
        created["session_id"].as_str().unwrap()
    ));
    let goal = json!({"text": "some long research goal about many things"});
    let first = {
        let (url, goal) = (Arc::clone(&url), goal.clone());
        thread::spawn(move || call(agent().post(&url).send_json(goal)).0)
    };
    thread::sleep(Duration::from_millis(100));
    let second = call(agent().post(&url).send_json(goal.clone())).0;
    assert_eq!(second, 409);
    assert_eq!(first.join().unwrap(), 200);
    // Once the first turn is done the session accepts turns again.
    assert_eq!(call(agent().post(&url).send_json(goal)).0, 200);
}

#[test]
fn scripts_pass_over_http() {
    let base = desk_server();
    let target = HttpChatTarget::new(&base);
    for name in ["scenario1_emotion.json", "scenario2_exam_questions.json"] {
        let text = std::fs::read_to_string(common::repo_path(&format!("fixtures/scripts/{name}")))
            .unwrap();
        let report = run_script(&ConversationScript::from_json(&text).unwrap(), &target).unwrap();
        assert!(report.passed, "{name}: {:?}", report.first_failure);
        assert_eq!(report.final_state().as_str(), "S7_wrapup");
    }
}
