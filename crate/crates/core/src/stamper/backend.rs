use std::sync::atomic::{AtomicU32, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use chrono::{NaiveDate, NaiveDateTime};
use serde::{Deserialize, Serialize};

use crate::catalog::now_local;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BackendError {
    /// Transient; the submission may be retried.
    #[error("anchoring backend unavailable: {0}")]
    Unavailable(String),
    #[error("anchoring backend rejected the submission: {0}")]
    Rejected(String),
}

/// An anchoring service. Only the root hash is ever sent.
pub trait AnchorBackend: Send + Sync {
    fn submit(&self, root_hex: &str, date: NaiveDate) -> Result<String, BackendError>;
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MockSubmission {
    pub root_hex: String,
    pub date: NaiveDate,
    pub received_at: NaiveDateTime,
    pub receipt: String,
}

/// In-process backend that records what it receives. It can be told to fail
/// a number of times first.
#[derive(Debug, Default)]
pub struct MockBackend {
    submissions: Mutex<Vec<MockSubmission>>,
    failures_left: AtomicU32,
}

impl MockBackend {
    pub fn new() -> Self {
        Self::default()
    }

    /// The next `n` submissions fail with [`BackendError::Unavailable`].
    pub fn fail_next(&self, n: u32) {
        self.failures_left.store(n, Ordering::SeqCst);
    }

    pub fn submissions(&self) -> Vec<MockSubmission> {
        self.submissions.lock().unwrap().clone()
    }
}

impl AnchorBackend for MockBackend {
    fn submit(&self, root_hex: &str, date: NaiveDate) -> Result<String, BackendError> {
        let failing = self
            .failures_left
            .fetch_update(Ordering::SeqCst, Ordering::SeqCst, |n| n.checked_sub(1))
            .is_ok();
        if failing {
            return Err(BackendError::Unavailable("mock backend told to fail".into()));
        }
        let mut subs = self.submissions.lock().unwrap();
        let receipt = format!("mock-{}:{date}:{root_hex}", subs.len() + 1);
        subs.push(MockSubmission {
            root_hex: root_hex.to_string(),
            date,
            received_at: now_local(),
            receipt: receipt.clone(),
        });
        Ok(receipt)
    }
}

#[derive(Serialize)]
struct SubmitRequest<'a> {
    root: &'a str,
    date: NaiveDate,
}

#[derive(Deserialize)]
struct SubmitResponse {
    receipt: String,
}

/// JSON-over-HTTP adapter: `POST {base_url}/submit` with
/// `{"root": <hex>, "date": "YYYY-MM-DD"}` and a bearer token; the service
/// answers `{"receipt": "..."}`.
pub struct HttpBackend {
    base_url: String,
    api_key: Option<String>,
    agent: ureq::Agent,
}

impl HttpBackend {
    pub fn new(base_url: impl Into<String>, api_key: Option<String>) -> Self {
        let agent = ureq::Agent::config_builder().timeout_global(Some(Duration::from_secs(30))).build().into();
        HttpBackend { base_url: base_url.into().trim_end_matches('/').to_string(), api_key, agent }
    }
}

impl AnchorBackend for HttpBackend {
    fn submit(&self, root_hex: &str, date: NaiveDate) -> Result<String, BackendError> {
        let mut req = self.agent.post(format!("{}/submit", self.base_url));
        if let Some(key) = &self.api_key {
            req = req.header("Authorization", format!("Bearer {key}"));
        }
        match req.send_json(SubmitRequest { root: root_hex, date }) {
            Ok(mut resp) => resp
                .body_mut()
                .read_json::<SubmitResponse>()
                .map(|r| r.receipt)
                .map_err(|e| BackendError::Rejected(format!("unreadable response: {e}"))),
            Err(ureq::Error::StatusCode(code)) if (400..500).contains(&code) && code != 429 => {
                Err(BackendError::Rejected(format!("HTTP {code}")))
            }
            Err(e) => Err(BackendError::Unavailable(e.to_string())),
        }
    }
}
