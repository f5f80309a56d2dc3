//! Blocking HTTP client for the scorer sidecar.
//!
//! Wire format (JSON):
//!
//! ```text
//! POST /score  {"items": [{"segments": ["q", "d"]}, ...]}  ->  {"scores": [0.93, ...]}
//! POST /embed  {"texts": ["...", ...]}                     ->  {"vectors": [[...], ...], "dim": 768}
//! GET  /info                                               ->  {"model_id", "dim", "max_tokens", "pooling"}
//! ```
//!
//! Inputs are cut into batches; at most `max_in_flight` batches are
//! outstanding at once and each result is slotted back by batch sequence
//! number. Transport failures and 5xx responses are retried with
//! exponential backoff; 4xx responses and malformed bodies are protocol
//! errors and are not retried.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;
use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::scorer::{DEFAULT_BATCH_SIZE, DEFAULT_MAX_IN_FLIGHT};
use super::ScorerInput;
use crate::credibility::{Embedder, Embedding};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    pub attempts: u32,
    pub initial_backoff: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            attempts: 3,
            initial_backoff: Duration::from_millis(250),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ScoreItem {
    pub segments: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ScoreRequest {
    pub items: Vec<ScoreItem>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ScoreResponse {
    pub scores: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct EmbedRequest {
    pub texts: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct EmbedResponse {
    pub vectors: Vec<Vec<f64>>,
    pub dim: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServiceInfo {
    pub model_id: String,
    pub dim: usize,
    pub max_tokens: usize,
    pub pooling: String,
}

enum Failure {
    Retryable(String),
    Fatal(Error),
}

#[derive(Debug, Clone)]
pub struct RemoteScorer {
    base_url: String,
    batch_size: usize,
    max_in_flight: usize,
    retry: RetryPolicy,
    agent: ureq::Agent,
}

impl RemoteScorer {
    pub fn new(base_url: impl Into<String>) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(Duration::from_secs(300)))
            .build()
            .into();
        RemoteScorer {
            base_url: base_url.into().trim_end_matches('/').to_string(),
            batch_size: DEFAULT_BATCH_SIZE,
            max_in_flight: DEFAULT_MAX_IN_FLIGHT,
            retry: RetryPolicy::default(),
            agent,
        }
    }

    pub fn with_limits(mut self, batch_size: usize, max_in_flight: usize) -> Self {
        self.batch_size = batch_size.max(1);
        self.max_in_flight = max_in_flight.max(1);
        self
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    fn post_once<B: Serialize, R: DeserializeOwned>(&self, path: &str, body: &B) -> std::result::Result<R, Failure> {
        let url = format!("{}{path}", self.base_url);
        let mut resp = self
            .agent
            .post(&url)
            .send_json(body)
            .map_err(|e| Failure::Retryable(e.to_string()))?;
        let status = resp.status().as_u16();
        if status >= 500 {
            return Err(Failure::Retryable(format!("{url} returned HTTP {status}")));
        }
        if status >= 400 {
            let text = resp.body_mut().read_to_string().unwrap_or_default();
            return Err(Failure::Fatal(Error::Protocol(format!(
                "{url} rejected request with HTTP {status}: {text}"
            ))));
        }
        resp.body_mut()
            .read_json::<R>()
            .map_err(|e| Failure::Fatal(Error::Protocol(format!("{url}: malformed response: {e}"))))
    }

    fn post_with_retry<B: Serialize, R: DeserializeOwned>(&self, path: &str, body: &B, batch: usize) -> Result<R> {
        let attempts = self.retry.attempts.max(1);
        let mut backoff = self.retry.initial_backoff;
        let mut last = String::new();
        for attempt in 1..=attempts {
            match self.post_once(path, body) {
                Ok(r) => return Ok(r),
                Err(Failure::Fatal(e)) => return Err(e),
                Err(Failure::Retryable(msg)) => {
                    last = msg;
                    if attempt < attempts {
                        thread::sleep(backoff);
                        backoff *= 2;
                    }
                }
            }
        }
        Err(Error::Remote {
            batch,
            attempts,
            message: last,
        })
    }

    /// Runs `call` over `count` batches with bounded concurrency, returning
    /// per-batch results in sequence order.
    fn run_batches<T: Send>(&self, count: usize, call: impl Fn(usize) -> Result<T> + Sync) -> Result<Vec<T>> {
        let next = AtomicUsize::new(0);
        let slots: Mutex<Vec<Option<Result<T>>>> = Mutex::new((0..count).map(|_| None).collect());
        let workers = self.max_in_flight.min(count).max(1);
        thread::scope(|s| {
            for _ in 0..workers {
                s.spawn(|| loop {
                    let seq = next.fetch_add(1, Ordering::SeqCst);
                    if seq >= count {
                        break;
                    }
                    let r = call(seq);
                    let failed = r.is_err();
                    slots.lock().expect("batch slot lock")[seq] = Some(r);
                    if failed {
                        // stop handing out new batches
                        next.store(count, Ordering::SeqCst);
                    }
                });
            }
        });
        let slots = slots.into_inner().expect("batch slot lock");
        let mut out = Vec::with_capacity(count);
        for (seq, slot) in slots.into_iter().enumerate() {
            match slot {
                Some(r) => out.push(r?),
                None => {
                    return Err(Error::Remote {
                        batch: seq,
                        attempts: 0,
                        message: "not sent after an earlier batch failed".into(),
                    })
                }
            }
        }
        Ok(out)
    }

    pub fn score(&self, inputs: &[ScorerInput]) -> Result<Vec<f64>> {
        if inputs.is_empty() {
            return Ok(Vec::new());
        }
        let batches: Vec<&[ScorerInput]> = inputs.chunks(self.batch_size).collect();
        let results = self.run_batches(batches.len(), |seq| {
            let batch = batches[seq];
            let req = ScoreRequest {
                items: batch
                    .iter()
                    .map(|i| ScoreItem {
                        segments: i.segments().to_vec(),
                    })
                    .collect(),
            };
            let resp: ScoreResponse = self.post_with_retry("/score", &req, seq)?;
            if resp.scores.len() != batch.len() {
                return Err(Error::Protocol(format!(
                    "batch {seq}: {} scores for {} items",
                    resp.scores.len(),
                    batch.len()
                )));
            }
            if let Some(bad) = resp.scores.iter().find(|s| !(0.0..=1.0).contains(*s)) {
                return Err(Error::Protocol(format!("batch {seq}: score {bad} outside [0, 1]")));
            }
            Ok(resp.scores)
        })?;
        Ok(results.into_iter().flatten().collect())
    }

    pub fn info(&self) -> Result<ServiceInfo> {
        let url = format!("{}/info", self.base_url);
        let mut resp = self.agent.get(&url).call().map_err(|e| Error::Remote {
            batch: 0,
            attempts: 1,
            message: e.to_string(),
        })?;
        if resp.status().as_u16() != 200 {
            return Err(Error::Protocol(format!("{url} returned HTTP {}", resp.status())));
        }
        resp.body_mut()
            .read_json()
            .map_err(|e| Error::Protocol(format!("{url}: malformed response: {e}")))
    }
}

impl Embedder for RemoteScorer {
    fn embed(&self, texts: &[String]) -> Result<Vec<Embedding>> {
        if texts.is_empty() {
            return Ok(Vec::new());
        }
        let batches: Vec<&[String]> = texts.chunks(self.batch_size).collect();
        let results = self.run_batches(batches.len(), |seq| {
            let batch = batches[seq];
            let req = EmbedRequest { texts: batch.to_vec() };
            let resp: EmbedResponse = self.post_with_retry("/embed", &req, seq)?;
            if resp.vectors.len() != batch.len() {
                return Err(Error::Protocol(format!(
                    "batch {seq}: {} vectors for {} texts",
                    resp.vectors.len(),
                    batch.len()
                )));
            }
            resp.vectors
                .into_iter()
                .map(|v| {
                    if v.len() != resp.dim {
                        return Err(Error::Protocol(format!(
                            "batch {seq}: vector of length {} but dim {}",
                            v.len(),
                            resp.dim
                        )));
                    }
                    Embedding::new(v).map_err(|e| Error::Protocol(e.to_string()))
                })
                .collect::<Result<Vec<_>>>()
        })?;
        Ok(results.into_iter().flatten().collect())
    }
}
