//! First-stage lexical retrieval: tokenization, an in-memory inverted
//! index, and BM25 ranking.

mod index_file;
mod tokenizer;

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::corpus_io::{Document, RunEntry, Topic};
use crate::error::{Error, Result};

pub use index_file::{read_index, write_index, INDEX_MAGIC, INDEX_VERSION};
pub use tokenizer::{Stemmer, Tokenizer, ENGLISH_STOPWORDS};

/// Default first-stage depth.
pub const DEFAULT_DEPTH: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Posting {
    pub ordinal: u32,
    pub tf: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InvertedIndex {
    tokenizer: Tokenizer,
    postings: BTreeMap<String, Vec<Posting>>,
    doc_ids: Vec<String>,
    doc_lengths: Vec<u32>,
    avg_doc_length: f64,
    ordinals: HashMap<String, u32>,
}

impl InvertedIndex {
    pub fn build(corpus: &[Document], tokenizer: &Tokenizer) -> Result<Self> {
        if corpus.is_empty() {
            return Err(Error::validation("cannot index an empty corpus"));
        }
        let mut postings: BTreeMap<String, Vec<Posting>> = BTreeMap::new();
        let mut doc_ids = Vec::with_capacity(corpus.len());
        let mut doc_lengths = Vec::with_capacity(corpus.len());
        for (ordinal, doc) in corpus.iter().enumerate() {
            let tokens = tokenizer.tokenize(&doc.text);
            doc_lengths.push(tokens.len() as u32);
            doc_ids.push(doc.doc_id.clone());
            let mut counts: BTreeMap<String, u32> = BTreeMap::new();
            for tok in tokens {
                *counts.entry(tok).or_default() += 1;
            }
            for (term, tf) in counts {
                postings.entry(term).or_default().push(Posting {
                    ordinal: ordinal as u32,
                    tf,
                });
            }
        }
        Self::from_parts(tokenizer.clone(), postings, doc_ids, doc_lengths)
    }

    pub(crate) fn from_parts(
        tokenizer: Tokenizer,
        postings: BTreeMap<String, Vec<Posting>>,
        doc_ids: Vec<String>,
        doc_lengths: Vec<u32>,
    ) -> Result<Self> {
        if doc_ids.is_empty() || doc_ids.len() != doc_lengths.len() {
            return Err(Error::validation("index doc table is empty or inconsistent"));
        }
        let mut ordinals = HashMap::with_capacity(doc_ids.len());
        for (i, id) in doc_ids.iter().enumerate() {
            if ordinals.insert(id.clone(), i as u32).is_some() {
                return Err(Error::validation(format!("duplicate doc_id \"{id}\" in index")));
            }
        }
        let n = doc_ids.len() as u32;
        for (term, list) in &postings {
            let sorted = list.windows(2).all(|w| w[0].ordinal < w[1].ordinal);
            if !sorted || list.iter().any(|p| p.ordinal >= n || p.tf == 0) {
                return Err(Error::validation(format!("corrupt postings for term \"{term}\"")));
            }
        }
        let total: u64 = doc_lengths.iter().map(|&l| u64::from(l)).sum();
        let avg_doc_length = total as f64 / doc_lengths.len() as f64;
        Ok(InvertedIndex {
            tokenizer,
            postings,
            doc_ids,
            doc_lengths,
            avg_doc_length,
            ordinals,
        })
    }

    pub fn tokenizer(&self) -> &Tokenizer {
        &self.tokenizer
    }

    pub fn doc_count(&self) -> usize {
        self.doc_ids.len()
    }

    pub fn avg_doc_length(&self) -> f64 {
        self.avg_doc_length
    }

    pub fn doc_length(&self, ordinal: u32) -> Option<u32> {
        self.doc_lengths.get(ordinal as usize).copied()
    }

    pub fn doc_id(&self, ordinal: u32) -> Option<&str> {
        self.doc_ids.get(ordinal as usize).map(String::as_str)
    }

    pub fn ordinal(&self, doc_id: &str) -> Option<u32> {
        self.ordinals.get(doc_id).copied()
    }

    pub fn postings(&self, term: &str) -> &[Posting] {
        self.postings.get(term).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn terms(&self) -> impl Iterator<Item = (&str, &[Posting])> {
        self.postings.iter().map(|(t, p)| (t.as_str(), p.as_slice()))
    }

    pub fn doc_frequency(&self, term: &str) -> usize {
        self.postings(term).len()
    }

    /// Robertson idf with +1 inside the log, so it is always positive.
    pub fn idf(&self, term: &str) -> f64 {
        let n = self.doc_count() as f64;
        let df = self.doc_frequency(term) as f64;
        (1.0 + (n - df + 0.5) / (df + 0.5)).ln()
    }

    pub(crate) fn doc_lengths(&self) -> &[u32] {
        &self.doc_lengths
    }

    pub(crate) fn doc_ids(&self) -> &[String] {
        &self.doc_ids
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Bm25Params { k1: 1.2, b: 0.75 }
    }
}

impl Bm25Params {
    pub fn validate(&self) -> Result<()> {
        if !(self.k1 > 0.0 && self.k1.is_finite()) {
            return Err(Error::validation(format!("k1 must be > 0, got {}", self.k1)));
        }
        if !(0.0..=1.0).contains(&self.b) {
            return Err(Error::validation(format!("b must be in [0, 1], got {}", self.b)));
        }
        Ok(())
    }
}

fn term_weight(idf: f64, tf: u32, dl: u32, avgdl: f64, p: Bm25Params) -> f64 {
    let tf = f64::from(tf);
    let norm = 1.0 - p.b + p.b * f64::from(dl) / avgdl;
    idf * tf * (p.k1 + 1.0) / (tf + p.k1 * norm)
}

/// Query terms are treated as a set, visited in sorted order so every
/// scoring path accumulates in the same sequence.
fn query_terms(query_tokens: &[String]) -> BTreeSet<&str> {
    query_tokens.iter().map(String::as_str).collect()
}

pub fn bm25_score(index: &InvertedIndex, query_tokens: &[String], ordinal: u32, params: Bm25Params) -> Result<f64> {
    params.validate()?;
    let dl = index
        .doc_length(ordinal)
        .ok_or_else(|| Error::validation(format!("unknown document ordinal {ordinal}")))?;
    let mut score = 0.0;
    for term in query_terms(query_tokens) {
        let list = index.postings(term);
        if let Ok(pos) = list.binary_search_by_key(&ordinal, |p| p.ordinal) {
            score += term_weight(index.idf(term), list[pos].tf, dl, index.avg_doc_length, params);
        }
    }
    Ok(score)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredDoc {
    pub doc_id: String,
    pub score: f64,
}

/// A per-topic ranking, best first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedList {
    pub topic_id: String,
    pub items: Vec<ScoredDoc>,
}

/// Score descending, then doc_id ascending.
pub fn rank_order(a: &ScoredDoc, b: &ScoredDoc) -> Ordering {
    b.score.total_cmp(&a.score).then_with(|| a.doc_id.cmp(&b.doc_id))
}

impl RankedList {
    pub fn new(topic_id: impl Into<String>, mut items: Vec<ScoredDoc>) -> Self {
        items.sort_by(rank_order);
        RankedList {
            topic_id: topic_id.into(),
            items,
        }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn doc_ids(&self) -> Vec<&str> {
        self.items.iter().map(|i| i.doc_id.as_str()).collect()
    }

    pub fn to_run_entries(&self, tag: &str) -> Vec<RunEntry> {
        self.items
            .iter()
            .enumerate()
            .map(|(i, it)| RunEntry {
                topic_id: self.topic_id.clone(),
                doc_id: it.doc_id.clone(),
                rank: i + 1,
                score: it.score,
                tag: tag.to_string(),
            })
            .collect()
    }

    /// Groups run entries by topic (first-appearance order), each topic in
    /// rank order.
    pub fn from_run(entries: &[RunEntry]) -> Vec<RankedList> {
        let mut order: Vec<&str> = Vec::new();
        let mut groups: HashMap<&str, Vec<&RunEntry>> = HashMap::new();
        for e in entries {
            groups
                .entry(e.topic_id.as_str())
                .or_insert_with(|| {
                    order.push(e.topic_id.as_str());
                    Vec::new()
                })
                .push(e);
        }
        order
            .into_iter()
            .map(|t| {
                let mut list = groups.remove(t).unwrap_or_default();
                list.sort_by_key(|e| e.rank);
                RankedList {
                    topic_id: t.to_string(),
                    items: list
                        .into_iter()
                        .map(|e| ScoredDoc {
                            doc_id: e.doc_id.clone(),
                            score: e.score,
                        })
                        .collect(),
                }
            })
            .collect()
    }
}

pub fn runs_to_entries(lists: &[RankedList], tag: &str) -> Vec<RunEntry> {
    lists.iter().flat_map(|l| l.to_run_entries(tag)).collect()
}

/// Top-`n` BM25 retrieval for one topic. Only documents sharing at least
/// one term with the query are returned.
pub fn retrieve(index: &InvertedIndex, topic: &Topic, n: usize, params: Bm25Params) -> Result<RankedList> {
    if n == 0 {
        return Err(Error::validation("retrieval depth must be at least 1"));
    }
    params.validate()?;
    let tokens = index.tokenizer.tokenize(&topic.text);
    let mut acc = vec![0.0f64; index.doc_count()];
    let mut touched = vec![false; index.doc_count()];
    for term in query_terms(&tokens) {
        let idf = index.idf(term);
        for p in index.postings(term) {
            let i = p.ordinal as usize;
            acc[i] += term_weight(idf, p.tf, index.doc_lengths[i], index.avg_doc_length, params);
            touched[i] = true;
        }
    }
    let mut items: Vec<ScoredDoc> = touched
        .iter()
        .enumerate()
        .filter(|(_, &t)| t)
        .map(|(i, _)| ScoredDoc {
            doc_id: index.doc_ids[i].clone(),
            score: acc[i],
        })
        .collect();
    items.sort_by(rank_order);
    items.truncate(n);
    Ok(RankedList {
        topic_id: topic.topic_id.clone(),
        items,
    })
}

/// Min-max normalizes scores within the list. A constant list maps to 1.0.
pub fn minmax_normalize(list: &RankedList) -> Result<RankedList> {
    if list.is_empty() {
        return Err(Error::validation(format!(
            "cannot normalize empty list for topic \"{}\"",
            list.topic_id
        )));
    }
    let (min, max) = list
        .items
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), it| {
            (lo.min(it.score), hi.max(it.score))
        });
    let span = max - min;
    let items = list
        .items
        .iter()
        .map(|it| ScoredDoc {
            doc_id: it.doc_id.clone(),
            score: if span > 0.0 { (it.score - min) / span } else { 1.0 },
        })
        .collect();
    Ok(RankedList {
        topic_id: list.topic_id.clone(),
        items,
    })
}
