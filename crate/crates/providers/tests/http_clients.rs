//! Clients against a scripted local HTTP server.

use std::net::TcpListener;
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Instant;

use scholarchat_core::classify::{QueryEncoder, TopicProvider};
use scholarchat_core::ingest::MetadataProvider;
use scholarchat_core::llm::{GenerationParams, TextGenerator};
use scholarchat_core::provider::ProviderError;
use scholarchat_core::segment::SentenceLabeler;
use scholarchat_providers::{
    HttpConfig, HttpGenerator, HttpMetadata, HttpQueryEncoder, HttpSentenceLabeler,
    HttpTopicProvider, WireFormat,
};

/// A request as the server saw it.
#[derive(Debug, Clone)]
struct Seen {
    method: String,
    url: String,
    body: serde_json::Value,
}

/// Serves `replies` in order, one per request, then stops.
fn serve(replies: Vec<(u16, &'static str)>) -> (String, Arc<Mutex<Vec<Seen>>>) {
    let server = tiny_http::Server::http("127.0.0.1:0").unwrap();
    let base = format!("http://{}", server.server_addr().to_ip().unwrap());
    let seen = Arc::new(Mutex::new(Vec::new()));
    let log = Arc::clone(&seen);
    thread::spawn(move || {
        for (status, body) in replies {
            let mut req = server.recv().unwrap();
            let mut raw = String::new();
            req.as_reader().read_to_string(&mut raw).unwrap();
            log.lock().unwrap().push(Seen {
                method: req.method().to_string(),
                url: req.url().to_string(),
                body: serde_json::from_str(&raw).unwrap_or(serde_json::Value::Null),
            });
            let header = tiny_http::Header::from_bytes("Content-Type", "application/json").unwrap();
            let resp = tiny_http::Response::from_string(body)
                .with_status_code(status)
                .with_header(header);
            req.respond(resp).unwrap();
        }
    });
    (base, seen)
}

fn fast(base: &str) -> HttpConfig {
    HttpConfig {
        base_url: base.to_string(),
        timeout_ms: 2_000,
        retries: 2,
        backoff_ms: 10,
    }
}

#[test]
fn generator_recovers_after_two_server_errors() {
    let (base, seen) = serve(vec![
        (500, "{}"),
        (500, "{}"),
        (200, r#"{"text":"a comparison"}"#),
    ]);
    let g = HttpGenerator::new(fast(&base), WireFormat::Plain, "");
    let text = g.complete("hello", &GenerationParams::COMPARISON).unwrap();
    assert_eq!(text, "a comparison");
    let seen = seen.lock().unwrap();
    assert_eq!(seen.len(), 3);
    assert_eq!(seen[2].method, "POST");
    assert_eq!(seen[2].url, "/generate");
    assert_eq!(
        seen[2].body,
        serde_json::json!({"prompt": "hello", "max_tokens": 512, "temperature": 0.3})
    );
}

#[test]
fn generator_gives_up_after_three_attempts() {
    let (base, seen) = serve(vec![(503, "{}"), (503, "{}"), (503, "{}")]);
    let g = HttpGenerator::new(fast(&base), WireFormat::Plain, "");
    let err = g
        .complete("x", &GenerationParams::CLUSTER_NAME)
        .unwrap_err();
    assert!(matches!(err, ProviderError::Unavailable(_)), "{err}");
    assert_eq!(seen.lock().unwrap().len(), 3);
}

#[test]
fn unreachable_endpoint_is_unavailable() {
    let port = TcpListener::bind("127.0.0.1:0")
        .unwrap()
        .local_addr()
        .unwrap()
        .port();
    let g = HttpGenerator::new(
        fast(&format!("http://127.0.0.1:{port}")),
        WireFormat::Plain,
        "",
    );
    let started = Instant::now();
    let err = g.complete("x", &GenerationParams::COMPARISON).unwrap_err();
    let ProviderError::Unavailable(msg) = err else {
        panic!("{err:?}")
    };
    assert!(msg.contains("after 3 attempts"), "{msg}");
    // Two backoff waits of 10 and 20 ms happened.
    assert!(started.elapsed().as_millis() >= 30);
}

#[test]
fn client_errors_are_not_retried() {
    let (base, seen) = serve(vec![(400, r#"{"error":"bad"}"#)]);
    let p = HttpTopicProvider::new(fast(&base));
    assert!(matches!(
        p.classify("q"),
        Err(ProviderError::InvalidResponse(_))
    ));
    assert_eq!(seen.lock().unwrap().len(), 1);
}

#[test]
fn chat_wire_format() {
    let (base, seen) = serve(vec![(
        200,
        r#"{"choices":[{"message":{"role":"assistant","content":"hi"}}]}"#,
    )]);
    let g = HttpGenerator::new(fast(&base), WireFormat::OpenaiChat, "some-model");
    assert_eq!(
        g.complete("p", &GenerationParams::COMPARISON).unwrap(),
        "hi"
    );
    let seen = seen.lock().unwrap();
    assert_eq!(seen[0].url, "/chat/completions");
    assert_eq!(seen[0].body["model"], "some-model");
    assert_eq!(seen[0].body["messages"][0]["content"], "p");
}

#[test]
fn classifier_labeler_and_encoder_bodies() {
    let (base, seen) = serve(vec![
        (200, r#"{"label":"Sentiment Analysis"}"#),
        (200, r#"{"labels":["background","objectives"]}"#),
        (200, r#"{"labels":["background"]}"#),
        (200, r#"{"vector":[0.5,-1.0]}"#),
    ]);
    let cfg = fast(&base);
    assert_eq!(
        HttpTopicProvider::new(cfg.clone())
            .classify("feelings")
            .unwrap(),
        "Sentiment Analysis"
    );
    let labeler = HttpSentenceLabeler::new(cfg.clone());
    let two = vec!["One.".to_string(), "Two.".to_string()];
    assert_eq!(labeler.label(&two).unwrap(), ["background", "objectives"]);
    assert!(matches!(
        labeler.label(&two),
        Err(ProviderError::InvalidResponse(_))
    ));
    assert_eq!(
        HttpQueryEncoder::new(cfg).encode("q").unwrap(),
        Some(vec![0.5, -1.0])
    );
    let seen = seen.lock().unwrap();
    assert_eq!(seen[0].url, "/classify");
    assert_eq!(seen[0].body, serde_json::json!({"text": "feelings"}));
    assert_eq!(seen[1].url, "/label");
    assert_eq!(
        seen[1].body,
        serde_json::json!({"sentences": ["One.", "Two."]})
    );
    assert_eq!(seen[3].url, "/encode");
}

#[test]
fn metadata_found_and_missing() {
    let (base, seen) = serve(vec![
        (
            200,
            r#"{"tldr":{"text":"Short."},"citationCount":7,"references":[{"paperId":"p2"}]}"#,
        ),
        (404, "{}"),
    ]);
    let m = HttpMetadata::new(fast(&base));
    let found = m.fetch("p1").unwrap().unwrap();
    assert_eq!(found.tldr.as_deref(), Some("Short."));
    assert_eq!(found.citation_count, Some(7));
    assert_eq!(found.references, Some(vec!["p2".to_string()]));
    assert_eq!(m.fetch("a/b c").unwrap(), None);
    let seen = seen.lock().unwrap();
    assert_eq!(seen[0].method, "GET");
    assert_eq!(seen[0].url, "/paper/p1");
    assert_eq!(seen[1].url, "/paper/a%2Fb%20c");
}
