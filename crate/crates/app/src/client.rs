//! Plays scripted conversations against a running server.

use std::thread;
use std::time::Duration;

use scholarchat_core::dialogue::TurnReply;
use scholarchat_core::eval::{ChatTarget, EvalError};

/// Client for the chat API. A 409 answer means the session is still busy
/// with an earlier turn; the client waits and resends.
pub struct HttpChatTarget {
    base: String,
    agent: ureq::Agent,
    busy_retries: u32,
}

impl HttpChatTarget {
    pub fn new(base: impl Into<String>) -> Self {
        HttpChatTarget {
            base: base.into().trim_end_matches('/').to_string(),
            agent: ureq::AgentBuilder::new()
                .timeout(Duration::from_secs(60))
                .build(),
            busy_retries: 50,
        }
    }

    fn decode(resp: ureq::Response) -> Result<TurnReply, EvalError> {
        resp.into_json()
            .map_err(|e| EvalError::Target(format!("bad response body: {e}")))
    }
}

fn target_err(e: ureq::Error) -> EvalError {
    match e {
        ureq::Error::Status(code, resp) => {
            let body = resp.into_string().unwrap_or_default();
            EvalError::Target(format!("HTTP {code}: {body}"))
        }
        ureq::Error::Transport(t) => EvalError::Target(t.to_string()),
    }
}

impl ChatTarget for HttpChatTarget {
    fn open(&self) -> Result<TurnReply, EvalError> {
        let resp = self
            .agent
            .post(&format!("{}/api/sessions", self.base))
            .send_json(serde_json::json!({}))
            .map_err(target_err)?;
        Self::decode(resp)
    }

    fn send(&self, session_id: &str, text: &str) -> Result<TurnReply, EvalError> {
        let url = format!("{}/api/sessions/{session_id}/messages", self.base);
        for _ in 0..self.busy_retries {
            match self
                .agent
                .post(&url)
                .send_json(serde_json::json!({ "text": text }))
            {
                Ok(resp) => return Self::decode(resp),
                Err(ureq::Error::Status(409, _)) => thread::sleep(Duration::from_millis(20)),
                Err(e) => return Err(target_err(e)),
            }
        }
        Err(EvalError::Target(format!(
            "session {session_id} stayed busy"
        )))
    }
}
