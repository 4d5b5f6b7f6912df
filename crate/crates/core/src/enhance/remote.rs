//! HTTP client for an external masked-word prediction service.
//!
//! Wire format, `POST <endpoint>/predict`:
//!
//! ```text
//! request:  {"tokens": ["where", "were", "<mask>", ...], "mask_index": 2, "k": 200}
//! response: {"candidates": [{"token": "you", "score": 0.91}, ...]}
//! ```
//!
//! Candidates must arrive sorted by descending score and number at most `k`.

use std::thread;
use std::time::Duration;

use log::warn;
use serde::Serialize;

use super::{CandidateList, MaskedPredictor, PredictError, PredictorQuery};

const EXCERPT_CHARS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    pub attempts: u32,
    /// Delay before the second attempt; doubles after every further failure.
    pub initial_backoff: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy { attempts: 3, initial_backoff: Duration::from_millis(200) }
    }
}

#[derive(Debug, Clone)]
pub struct RemotePredictor {
    url: String,
    agent: ureq::Agent,
    retry: RetryPolicy,
}

#[derive(Serialize)]
struct Request<'a> {
    tokens: &'a [String],
    mask_index: usize,
    k: usize,
}

enum Attempt {
    Retry(String),
    Fatal(PredictError),
}

fn excerpt(body: &str) -> String {
    body.chars().take(EXCERPT_CHARS).collect()
}

impl RemotePredictor {
    /// `endpoint` is the service base URL; `/predict` is appended unless present.
    pub fn new(endpoint: &str) -> Self {
        let base = endpoint.trim_end_matches('/');
        let url = if base.ends_with("/predict") { base.to_string() } else { format!("{base}/predict") };
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(Duration::from_secs(30)))
            .build()
            .into();
        RemotePredictor { url, agent, retry: RetryPolicy::default() }
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn url(&self) -> &str {
        &self.url
    }

    fn attempt(&self, query: &PredictorQuery) -> Result<CandidateList, Attempt> {
        let request = Request { tokens: &query.tokens, mask_index: query.mask_index, k: query.k };
        let mut response = self
            .agent
            .post(&self.url)
            .send_json(&request)
            .map_err(|e| Attempt::Retry(e.to_string()))?;
        let status = response.status().as_u16();
        let body = response
            .body_mut()
            .read_to_string()
            .map_err(|e| Attempt::Retry(format!("reading body: {e}")))?;
        if status >= 500 || status == 429 {
            return Err(Attempt::Retry(format!("HTTP {status}: {}", excerpt(&body))));
        }
        let protocol = |reason: String| Attempt::Fatal(PredictError::Protocol { reason, excerpt: excerpt(&body) });
        if !(200..300).contains(&status) {
            return Err(protocol(format!("unexpected HTTP status {status}")));
        }
        let list: CandidateList =
            serde_json::from_str(&body).map_err(|e| protocol(format!("malformed response: {e}")))?;
        list.validate(query.k).map_err(protocol)?;
        Ok(list)
    }
}

impl MaskedPredictor for RemotePredictor {
    fn predict(&self, query: &PredictorQuery) -> Result<CandidateList, PredictError> {
        let attempts = self.retry.attempts.max(1);
        let mut backoff = self.retry.initial_backoff;
        let mut last = String::new();
        for attempt in 1..=attempts {
            match self.attempt(query) {
                Ok(list) => return Ok(list),
                Err(Attempt::Fatal(e)) => return Err(e),
                Err(Attempt::Retry(msg)) => {
                    warn!("predictor attempt {attempt}/{attempts} to {} failed: {msg}", self.url);
                    last = msg;
                    if attempt < attempts {
                        thread::sleep(backoff);
                        backoff *= 2;
                    }
                }
            }
        }
        Err(PredictError::Retryable { attempts, message: last })
    }
}
