//! Credibility of a document for a topic: a rank-weighted combination of
//! cosine similarities between the document embedding and the embeddings
//! of the top-k evidence articles retrieved for the same topic.
//!
//! ```text
//! cred(d, q) = w1·cos(d, j1) + w2·cos(d, j2) + … + wk·cos(d, jk)
//! ```
//!
//! with `Σ wi = 1` and `wi >= wi+1`.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus_io::{write_jsonl, Document, EvidenceArticle, Topic};
use crate::error::{Error, Result};
use crate::lexical::{retrieve, Bm25Params, InvertedIndex, RankedList, Tokenizer, ENGLISH_STOPWORDS};

const WEIGHT_TOLERANCE: f64 = 1e-9;

pub const DEFAULT_EVIDENCE_K: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightSchedule {
    LinearDecay,
    Uniform,
    Custom(Vec<f64>),
}

impl FromStr for WeightSchedule {
    type Err = Error;

    /// Accepts `linear_decay`, `uniform`, or `custom:0.5,0.3,0.2`.
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear_decay" => Ok(WeightSchedule::LinearDecay),
            "uniform" => Ok(WeightSchedule::Uniform),
            _ => {
                let list = s
                    .strip_prefix("custom:")
                    .ok_or_else(|| Error::validation(format!("unknown weight schedule {s:?}")))?;
                let weights = list
                    .split(',')
                    .map(|w| {
                        w.trim()
                            .parse::<f64>()
                            .map_err(|_| Error::validation(format!("bad custom weight {w:?}")))
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(WeightSchedule::Custom(weights))
            }
        }
    }
}

/// Non-negative, non-increasing weights summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Weights(Vec<f64>);

impl TryFrom<Vec<f64>> for Weights {
    type Error = Error;

    fn try_from(w: Vec<f64>) -> Result<Self> {
        if w.is_empty() {
            return Err(Error::validation("weights must not be empty"));
        }
        if w.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(Error::validation(format!("weights must be finite and >= 0: {w:?}")));
        }
        if w.windows(2).any(|p| p[0] < p[1]) {
            return Err(Error::validation(format!("weights must be non-increasing: {w:?}")));
        }
        let sum: f64 = w.iter().sum();
        if (sum - 1.0).abs() > WEIGHT_TOLERANCE {
            return Err(Error::validation(format!("weights must sum to 1, got {sum}")));
        }
        Ok(Weights(w))
    }
}

impl From<Weights> for Vec<f64> {
    fn from(w: Weights) -> Self {
        w.0
    }
}

impl Weights {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Keeps the first `m` weights and rescales them to sum to one. Used when
    /// fewer than k evidence articles were found.
    pub fn truncated(&self, m: usize) -> Result<Weights> {
        if m == 0 || m > self.0.len() {
            return Err(Error::validation(format!(
                "cannot truncate {} weights to {m}",
                self.0.len()
            )));
        }
        let head = &self.0[..m];
        let sum: f64 = head.iter().sum();
        if sum <= 0.0 {
            return Err(Error::validation("leading weights sum to zero"));
        }
        Weights::try_from(head.iter().map(|w| w / sum).collect::<Vec<_>>())
    }
}

pub fn make_weights(k: usize, schedule: &WeightSchedule) -> Result<Weights> {
    if k == 0 {
        return Err(Error::validation("evidence count k must be at least 1"));
    }
    let w = match schedule {
        WeightSchedule::LinearDecay => {
            let total = (k * (k + 1) / 2) as f64;
            (1..=k).map(|i| (k - i + 1) as f64 / total).collect()
        }
        WeightSchedule::Uniform => vec![1.0 / k as f64; k],
        WeightSchedule::Custom(w) => {
            if w.len() != k {
                return Err(Error::validation(format!(
                    "custom schedule has {} weights but k = {k}",
                    w.len()
                )));
            }
            w.clone()
        }
    };
    Weights::try_from(w)
}

/// A dense embedding with finite entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Embedding(Vec<f64>);

impl TryFrom<Vec<f64>> for Embedding {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        if v.is_empty() {
            return Err(Error::validation("embedding must have dim >= 1"));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::validation("embedding has non-finite entries"));
        }
        Ok(Embedding(v))
    }
}

impl From<Embedding> for Vec<f64> {
    fn from(e: Embedding) -> Self {
        e.0
    }
}

impl Embedding {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        Self::try_from(values)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

pub fn cosine(a: &Embedding, b: &Embedding) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::validation(format!(
            "embedding dims differ: {} vs {}",
            a.dim(),
            b.dim()
        )));
    }
    let dot: f64 = a.0.iter().zip(&b.0).map(|(x, y)| x * y).sum();
    let na = a.0.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.0.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return Err(Error::validation("cosine of a zero vector is undefined"));
    }
    Ok((dot / (na * nb)).clamp(-1.0, 1.0))
}

/// Weighted combination of cosines, evidence in retrieval-rank order.
pub fn score_credibility(doc: &Embedding, evidence: &[Embedding], weights: &Weights) -> Result<f64> {
    if evidence.is_empty() {
        return Err(Error::validation("no evidence embeddings"));
    }
    if evidence.len() != weights.len() {
        return Err(Error::validation(format!(
            "{} evidence embeddings but {} weights",
            evidence.len(),
            weights.len()
        )));
    }
    let mut score = 0.0;
    for (w, e) in weights.as_slice().iter().zip(evidence) {
        score += w * cosine(doc, e)?;
    }
    Ok(score)
}

/// BM25 top-k evidence ids for the topic, best first. May return fewer
/// than k (or none).
pub fn retrieve_evidence(
    evidence_index: &InvertedIndex,
    topic: &Topic,
    k: usize,
    params: Bm25Params,
) -> Result<Vec<String>> {
    let ranked = retrieve(evidence_index, topic, k, params)?;
    Ok(ranked.items.into_iter().map(|i| i.doc_id).collect())
}

/// Output record of the credibility stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CredibilityScore {
    pub topic_id: String,
    pub doc_id: String,
    pub cred: f64,
    pub evidence_ids: Vec<String>,
    pub no_evidence_flag: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CredibilityConfig {
    pub k: usize,
    pub schedule: WeightSchedule,
    /// Score assigned when a topic has no matching evidence.
    pub no_evidence_score: f64,
    pub bm25: Bm25Params,
}

impl Default for CredibilityConfig {
    fn default() -> Self {
        CredibilityConfig {
            k: DEFAULT_EVIDENCE_K,
            schedule: WeightSchedule::LinearDecay,
            no_evidence_score: 0.0,
            bm25: Bm25Params::default(),
        }
    }
}

/// Produces embeddings for texts. Implemented by the offline hashing
/// embedder and by the remote scorer client.
pub trait Embedder {
    fn embed(&self, texts: &[String]) -> Result<Vec<Embedding>>;
}

/// Offline embedder: signed feature hashing of stopword-filtered tokens.
/// Deterministic for a given seed and dimension on every platform.
#[derive(Debug, Clone)]
pub struct HashingEmbedder {
    dim: usize,
    seed: u64,
    tokenizer: Tokenizer,
}

impl HashingEmbedder {
    pub const DEFAULT_DIM: usize = 256;

    pub fn new(dim: usize, seed: u64) -> Self {
        HashingEmbedder {
            dim: dim.max(1),
            seed,
            tokenizer: Tokenizer::default().with_stopwords(ENGLISH_STOPWORDS.iter().copied()),
        }
    }

    pub fn embed_one(&self, text: &str) -> Embedding {
        let mut v = vec![0.0; self.dim];
        let tokens = self.tokenizer.tokenize(text);
        if tokens.is_empty() {
            // keep the vector non-zero so cosine stays defined
            let h = fnv1a(self.seed, b"");
            v[(h % self.dim as u64) as usize] = 1.0;
        }
        for t in &tokens {
            let h = fnv1a(self.seed, t.as_bytes());
            let bucket = (h % self.dim as u64) as usize;
            let sign = if (h >> 63) == 0 { 1.0 } else { -1.0 };
            v[bucket] += sign;
        }
        if v.iter().all(|x| *x == 0.0) {
            // every token cancelled out
            v[0] = 1.0;
        }
        Embedding(v)
    }
}

impl Default for HashingEmbedder {
    fn default() -> Self {
        Self::new(Self::DEFAULT_DIM, 0)
    }
}

impl Embedder for HashingEmbedder {
    fn embed(&self, texts: &[String]) -> Result<Vec<Embedding>> {
        Ok(texts.iter().map(|t| self.embed_one(t)).collect())
    }
}

pub(crate) fn fnv1a(seed: u64, bytes: &[u8]) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64 ^ seed.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    // final avalanche so low bits depend on every byte
    h ^= h >> 33;
    h = h.wrapping_mul(0xff51_afd7_ed55_8ccd);
    h ^= h >> 33;
    h
}

/// Computes credibility for every (topic, document) pair of a first-stage
/// run. Embeddings are requested once per distinct text.
pub fn score_run(
    topics: &[Topic],
    first_stage: &[RankedList],
    corpus: &HashMap<&str, &Document>,
    evidence: &[EvidenceArticle],
    evidence_index: &InvertedIndex,
    config: &CredibilityConfig,
    embedder: &dyn Embedder,
) -> Result<Vec<CredibilityScore>> {
    let weights = make_weights(config.k, &config.schedule)?;
    let topic_map: HashMap<&str, &Topic> = topics.iter().map(|t| (t.topic_id.as_str(), t)).collect();
    let articles: HashMap<&str, &EvidenceArticle> = evidence.iter().map(|a| (a.article_id.as_str(), a)).collect();

    let mut evidence_for = Vec::with_capacity(first_stage.len());
    let mut needed_articles: Vec<&str> = Vec::new();
    for list in first_stage {
        let topic = topic_map
            .get(list.topic_id.as_str())
            .ok_or_else(|| Error::validation(format!("run topic \"{}\" not in topics file", list.topic_id)))?;
        let ids = retrieve_evidence(evidence_index, topic, config.k, config.bm25)?;
        for id in &ids {
            if !articles.contains_key(id.as_str()) {
                return Err(Error::validation(format!(
                    "evidence index references unknown article \"{id}\""
                )));
            }
            needed_articles.push(articles[id.as_str()].article_id.as_str());
        }
        evidence_for.push(ids);
    }
    needed_articles.sort_unstable();
    needed_articles.dedup();

    let mut needed_docs: Vec<&str> = first_stage
        .iter()
        .flat_map(|l| l.items.iter().map(|i| i.doc_id.as_str()))
        .collect();
    needed_docs.sort_unstable();
    needed_docs.dedup();
    for id in &needed_docs {
        if !corpus.contains_key(id) {
            return Err(Error::validation(format!("run document \"{id}\" not in corpus")));
        }
    }

    let article_texts: Vec<String> = needed_articles.iter().map(|id| articles[id].text.clone()).collect();
    let doc_texts: Vec<String> = needed_docs.iter().map(|id| corpus[id].text.clone()).collect();
    let article_embs: HashMap<&str, Embedding> = needed_articles
        .iter()
        .copied()
        .zip(embed_checked(embedder, &article_texts)?)
        .collect();
    let doc_embs: HashMap<&str, Embedding> = needed_docs
        .iter()
        .copied()
        .zip(embed_checked(embedder, &doc_texts)?)
        .collect();

    let mut out = Vec::new();
    for (list, ids) in first_stage.iter().zip(&evidence_for) {
        let evidence_embs: Vec<Embedding> = ids.iter().map(|id| article_embs[id.as_str()].clone()).collect();
        let w = if ids.is_empty() {
            None
        } else {
            Some(weights.truncated(ids.len())?)
        };
        for item in &list.items {
            let (cred, flag) = match &w {
                Some(w) => (
                    score_credibility(&doc_embs[item.doc_id.as_str()], &evidence_embs, w)?,
                    false,
                ),
                None => (config.no_evidence_score, true),
            };
            out.push(CredibilityScore {
                topic_id: list.topic_id.clone(),
                doc_id: item.doc_id.clone(),
                cred,
                evidence_ids: ids.clone(),
                no_evidence_flag: flag,
            });
        }
    }
    Ok(out)
}

fn embed_checked(embedder: &dyn Embedder, texts: &[String]) -> Result<Vec<Embedding>> {
    if texts.is_empty() {
        return Ok(Vec::new());
    }
    let embs = embedder.embed(texts)?;
    if embs.len() != texts.len() {
        return Err(Error::Protocol(format!(
            "embedder returned {} vectors for {} texts",
            embs.len(),
            texts.len()
        )));
    }
    Ok(embs)
}

/// Credibility records keyed by (topic_id, doc_id).
#[derive(Debug, Clone, Default)]
pub struct CredibilityTable {
    scores: HashMap<(String, String), CredibilityScore>,
}

impl CredibilityTable {
    pub fn new(records: Vec<CredibilityScore>) -> Result<Self> {
        let mut scores = HashMap::with_capacity(records.len());
        for r in records {
            if !r.cred.is_finite() {
                return Err(Error::validation(format!(
                    "non-finite credibility for topic \"{}\" doc \"{}\"",
                    r.topic_id, r.doc_id
                )));
            }
            let key = (r.topic_id.clone(), r.doc_id.clone());
            if scores.insert(key, r).is_some() {
                return Err(Error::validation("duplicate credibility record"));
            }
        }
        Ok(CredibilityTable { scores })
    }

    pub fn get(&self, topic_id: &str, doc_id: &str) -> Option<&CredibilityScore> {
        // String-keyed map; a borrowed-tuple lookup would need a custom key type.
        self.scores.get(&(topic_id.to_string(), doc_id.to_string()))
    }

    pub fn require(&self, topic_id: &str, doc_id: &str) -> Result<f64> {
        self.get(topic_id, doc_id).map(|r| r.cred).ok_or_else(|| {
            Error::validation(format!(
                "missing credibility record for topic \"{topic_id}\" doc \"{doc_id}\""
            ))
        })
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }
}

pub fn write_scores(scores: &[CredibilityScore], path: &Path) -> Result<()> {
    write_jsonl(scores, path)
}

pub fn read_scores(path: &Path) -> Result<Vec<CredibilityScore>> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line)
            .map_err(|e| Error::parse(path.display().to_string(), i + 1, "record", e.to_string()))?;
        out.push(rec);
    }
    Ok(out)
}
