use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::ScorerInput;
use crate::credibility::fnv1a;
use crate::error::{Error, Result};
use crate::lexical::Tokenizer;

pub const DEFAULT_BATCH_SIZE: usize = 4;
pub const DEFAULT_MAX_IN_FLIGHT: usize = 4;

/// Upper bound (exclusive) of the stub's deterministic tie-breaking jitter.
pub const STUB_JITTER: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Backend {
    /// Scorer sidecar base URL, e.g. `http://127.0.0.1:8080`.
    Remote(String),
    /// Offline token-overlap scorer.
    Stub(u64),
}

impl FromStr for Backend {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if let Some(seed) = s.strip_prefix("stub:") {
            let seed = seed
                .parse()
                .map_err(|_| Error::validation(format!("bad stub seed in {s:?}")))?;
            return Ok(Backend::Stub(seed));
        }
        if s == "stub" {
            return Ok(Backend::Stub(0));
        }
        if s.starts_with("http://") || s.starts_with("https://") {
            return Ok(Backend::Remote(s.trim_end_matches('/').to_string()));
        }
        Err(Error::validation(format!(
            "scorer must be `stub:<seed>` or an http(s) URL, got {s:?}"
        )))
    }
}

impl fmt::Display for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Backend::Remote(url) => f.write_str(url),
            Backend::Stub(seed) => write!(f, "stub:{seed}"),
        }
    }
}

impl TryFrom<String> for Backend {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Backend> for String {
    fn from(b: Backend) -> Self {
        b.to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScorerHandle {
    pub backend: Backend,
    pub batch_size: usize,
    pub max_in_flight: usize,
}

impl ScorerHandle {
    pub fn stub(seed: u64) -> Self {
        ScorerHandle {
            backend: Backend::Stub(seed),
            batch_size: DEFAULT_BATCH_SIZE,
            max_in_flight: DEFAULT_MAX_IN_FLIGHT,
        }
    }

    pub fn new(backend: Backend) -> Self {
        ScorerHandle {
            backend,
            ..Self::stub(0)
        }
    }
}

/// Jaccard overlap between the query segment's tokens and the tokens of all
/// remaining segments, scaled by `1 - STUB_JITTER` and offset by a seeded
/// hash of the input in `[0, STUB_JITTER)`.
pub fn stub_score(input: &ScorerInput, seed: u64) -> f64 {
    let tokenizer = Tokenizer::default();
    let segments = input.segments();
    let query: HashSet<String> = segments
        .first()
        .map(|q| tokenizer.tokenize(q).into_iter().collect())
        .unwrap_or_default();
    let rest: HashSet<String> = segments.iter().skip(1).flat_map(|s| tokenizer.tokenize(s)).collect();
    let inter = query.intersection(&rest).count();
    let union = query.union(&rest).count();
    let jaccard = if union == 0 { 0.0 } else { inter as f64 / union as f64 };

    let joined = segments.join("\u{1f}");
    let h = fnv1a(seed, joined.as_bytes());
    let jitter = (h >> 11) as f64 / (1u64 << 53) as f64 * STUB_JITTER;
    jaccard * (1.0 - STUB_JITTER) + jitter
}

/// Scores inputs in order. Empty input yields empty output.
pub fn score_batch(handle: &ScorerHandle, inputs: &[ScorerInput]) -> Result<Vec<f64>> {
    if inputs.is_empty() {
        return Ok(Vec::new());
    }
    match &handle.backend {
        Backend::Stub(seed) => Ok(inputs.iter().map(|i| stub_score(i, *seed)).collect()),
        #[cfg(feature = "remote")]
        Backend::Remote(url) => super::remote::RemoteScorer::new(url.clone())
            .with_limits(handle.batch_size, handle.max_in_flight)
            .score(inputs),
        #[cfg(not(feature = "remote"))]
        Backend::Remote(url) => Err(Error::Remote {
            batch: 0,
            attempts: 0,
            message: format!("built without remote scorer support ({url})"),
        }),
    }
}
