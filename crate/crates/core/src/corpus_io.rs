//! Readers and writers for corpora, topics, qrels and TREC run files.
//!
//! Corpora and topics are line-delimited JSON. Qrels and runs use the
//! whitespace-separated TREC layouts:
//!
//! ```text
//! qrels: topic_id 0 doc_id label
//! run:   topic_id Q0 doc_id rank score tag
//! ```

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub title: Option<String>,
}

impl Document {
    pub fn new(doc_id: impl Into<String>, text: impl Into<String>) -> Self {
        Document {
            doc_id: doc_id.into(),
            text: text.into(),
            title: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Topic {
    pub topic_id: String,
    pub text: String,
}

impl Topic {
    pub fn new(topic_id: impl Into<String>, text: impl Into<String>) -> Self {
        Topic {
            topic_id: topic_id.into(),
            text: text.into(),
        }
    }
}

/// A scientific article used as credibility evidence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvidenceArticle {
    #[serde(alias = "doc_id")]
    pub article_id: String,
    pub text: String,
}

impl EvidenceArticle {
    pub fn new(article_id: impl Into<String>, text: impl Into<String>) -> Self {
        EvidenceArticle {
            article_id: article_id.into(),
            text: text.into(),
        }
    }

    pub fn as_document(&self) -> Document {
        Document::new(self.article_id.clone(), self.text.clone())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QrelEntry {
    pub topic_id: String,
    pub doc_id: String,
    pub label: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunEntry {
    pub topic_id: String,
    pub doc_id: String,
    pub rank: usize,
    pub score: f64,
    pub tag: String,
}

/// How qrels labels outside `{0, 1}` are handled.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum LabelPolicy {
    /// Reject any label other than 0 or 1.
    #[default]
    Strict,
    /// Map labels >= 1 to 1 and labels <= 0 to 0 (graded qrels).
    Binarize,
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| Error::io(path, e))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

/// Parses line-delimited JSON records, skipping blank lines.
fn parse_jsonl<T: DeserializeOwned>(reader: impl BufRead, source: &str) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(source, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: T = serde_json::from_str(&line).map_err(|e| {
            let field = json_error_field(&e);
            Error::parse(source, idx + 1, field, e.to_string())
        })?;
        out.push(record);
    }
    Ok(out)
}

fn json_error_field(e: &serde_json::Error) -> String {
    // serde reports "missing field `x`" / "unknown field `x`"; pull the name out.
    let msg = e.to_string();
    msg.split('`')
        .nth(1)
        .map(str::to_string)
        .unwrap_or_else(|| "record".to_string())
}

pub fn write_jsonl<T: Serialize>(records: &[T], path: &Path) -> Result<()> {
    let mut w = create(path)?;
    for r in records {
        let line = serde_json::to_string(r).map_err(|e| Error::validation(e.to_string()))?;
        writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn check_text(source: &str, line: usize, field: &str, value: &str) -> Result<()> {
    if value.trim().is_empty() {
        return Err(Error::parse(source, line, field, "must not be empty"));
    }
    Ok(())
}

pub fn parse_corpus(reader: impl BufRead, source: &str) -> Result<Vec<Document>> {
    let docs: Vec<Document> = parse_jsonl(reader, source)?;
    let mut seen = HashSet::with_capacity(docs.len());
    for (i, d) in docs.iter().enumerate() {
        check_text(source, i + 1, "doc_id", &d.doc_id)?;
        check_text(source, i + 1, "text", &d.text)?;
        if !seen.insert(d.doc_id.as_str()) {
            return Err(Error::validation(format!(
                "{source}: duplicate doc_id \"{}\"",
                d.doc_id
            )));
        }
    }
    Ok(docs)
}

/// Loads a JSONL corpus in file order.
pub fn load_corpus(path: &Path) -> Result<Vec<Document>> {
    parse_corpus(open(path)?, &path.display().to_string())
}

pub fn load_evidence(path: &Path) -> Result<Vec<EvidenceArticle>> {
    let source = path.display().to_string();
    let articles: Vec<EvidenceArticle> = parse_jsonl(open(path)?, &source)?;
    let mut seen = HashSet::with_capacity(articles.len());
    for (i, a) in articles.iter().enumerate() {
        check_text(&source, i + 1, "article_id", &a.article_id)?;
        check_text(&source, i + 1, "text", &a.text)?;
        if !seen.insert(a.article_id.as_str()) {
            return Err(Error::validation(format!(
                "{source}: duplicate article_id \"{}\"",
                a.article_id
            )));
        }
    }
    Ok(articles)
}

pub fn parse_topics(reader: impl BufRead, source: &str) -> Result<Vec<Topic>> {
    let topics: Vec<Topic> = parse_jsonl(reader, source)?;
    let mut seen = HashSet::with_capacity(topics.len());
    for (i, t) in topics.iter().enumerate() {
        check_text(source, i + 1, "topic_id", &t.topic_id)?;
        check_text(source, i + 1, "text", &t.text)?;
        if !seen.insert(t.topic_id.as_str()) {
            return Err(Error::validation(format!(
                "{source}: duplicate topic_id \"{}\"",
                t.topic_id
            )));
        }
    }
    Ok(topics)
}

pub fn load_topics(path: &Path) -> Result<Vec<Topic>> {
    parse_topics(open(path)?, &path.display().to_string())
}

pub fn parse_qrels(reader: impl BufRead, source: &str, policy: LabelPolicy) -> Result<Vec<QrelEntry>> {
    let mut out = Vec::new();
    let mut seen: HashSet<(String, String)> = HashSet::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(source, e))?;
        let lineno = idx + 1;
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        if fields.len() != 4 {
            return Err(Error::parse(
                source,
                lineno,
                "line",
                format!("expected 4 fields, found {}", fields.len()),
            ));
        }
        let raw: i64 = fields[3]
            .parse()
            .map_err(|_| Error::parse(source, lineno, "label", format!("not an integer: {:?}", fields[3])))?;
        let label = match (raw, policy) {
            (0 | 1, _) => raw as u8,
            (_, LabelPolicy::Strict) => {
                return Err(Error::parse(
                    source,
                    lineno,
                    "label",
                    format!("label {raw} is not binary"),
                ))
            }
            (r, LabelPolicy::Binarize) => u8::from(r >= 1),
        };
        let key = (fields[0].to_string(), fields[2].to_string());
        if !seen.insert(key.clone()) {
            return Err(Error::validation(format!(
                "{source}:{lineno}: duplicate judgment for topic \"{}\" doc \"{}\"",
                key.0, key.1
            )));
        }
        out.push(QrelEntry {
            topic_id: key.0,
            doc_id: key.1,
            label,
        });
    }
    Ok(out)
}

pub fn load_qrels(path: &Path, policy: LabelPolicy) -> Result<Vec<QrelEntry>> {
    parse_qrels(open(path)?, &path.display().to_string(), policy)
}

/// Checks the run invariants topic by topic: ranks `1..n` without gaps,
/// unique documents, finite non-increasing scores.
///
/// Equal scores are accepted in any doc_id order, since 6-decimal printing
/// can create ties that were not ties before.
pub fn validate_run(entries: &[RunEntry]) -> Result<()> {
    let mut per_topic: HashMap<&str, Vec<&RunEntry>> = HashMap::new();
    let mut order = Vec::new();
    for e in entries {
        if !e.score.is_finite() {
            return Err(Error::validation(format!(
                "topic \"{}\" doc \"{}\": non-finite score",
                e.topic_id, e.doc_id
            )));
        }
        per_topic
            .entry(e.topic_id.as_str())
            .or_insert_with(|| {
                order.push(e.topic_id.as_str());
                Vec::new()
            })
            .push(e);
    }
    for topic in order {
        let mut list = per_topic.remove(topic).unwrap_or_default();
        list.sort_by_key(|e| e.rank);
        let mut docs = HashSet::with_capacity(list.len());
        for (i, e) in list.iter().enumerate() {
            if e.rank != i + 1 {
                return Err(Error::validation(format!(
                    "topic \"{topic}\": expected rank {}, found {}",
                    i + 1,
                    e.rank
                )));
            }
            if !docs.insert(e.doc_id.as_str()) {
                return Err(Error::validation(format!(
                    "topic \"{topic}\": doc \"{}\" appears twice",
                    e.doc_id
                )));
            }
            if i > 0 && list[i - 1].score < e.score {
                return Err(Error::validation(format!(
                    "topic \"{topic}\": score increases from rank {} to rank {}",
                    i,
                    i + 1
                )));
            }
        }
    }
    Ok(())
}

pub fn format_run_line(e: &RunEntry) -> String {
    format!("{} Q0 {} {} {:.6} {}", e.topic_id, e.doc_id, e.rank, e.score, e.tag)
}

pub fn write_run_to(entries: &[RunEntry], mut w: impl Write) -> std::io::Result<()> {
    for e in entries {
        writeln!(w, "{}", format_run_line(e))?;
    }
    w.flush()
}

/// Validates `entries` and writes them in TREC run format. Nothing is
/// written if validation fails.
pub fn write_run(entries: &[RunEntry], path: &Path) -> Result<()> {
    validate_run(entries)?;
    let w = create(path)?;
    write_run_to(entries, w).map_err(|e| Error::io(path, e))
}

pub fn parse_run(reader: impl BufRead, source: &str) -> Result<Vec<RunEntry>> {
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(source, e))?;
        let lineno = idx + 1;
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.is_empty() {
            continue;
        }
        if f.len() != 6 {
            return Err(Error::parse(
                source,
                lineno,
                "line",
                format!("expected 6 fields, found {}", f.len()),
            ));
        }
        let rank: usize = f[3]
            .parse()
            .map_err(|_| Error::parse(source, lineno, "rank", format!("not a positive integer: {:?}", f[3])))?;
        let score: f64 = f[4]
            .parse()
            .map_err(|_| Error::parse(source, lineno, "score", format!("not a number: {:?}", f[4])))?;
        if !score.is_finite() {
            return Err(Error::parse(source, lineno, "score", "not finite"));
        }
        out.push(RunEntry {
            topic_id: f[0].to_string(),
            doc_id: f[2].to_string(),
            rank,
            score,
            tag: f[5].to_string(),
        });
    }
    validate_run(&out)?;
    Ok(out)
}

pub fn read_run(path: &Path) -> Result<Vec<RunEntry>> {
    parse_run(open(path)?, &path.display().to_string())
}
