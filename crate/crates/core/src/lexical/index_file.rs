//! Binary index layout (all integers little-endian, strings are a `u32`
//! byte length followed by UTF-8 bytes):
//!
//! ```text
//! header    magic "RELSTIDX" | version u32
//! tokenizer lowercase u8 | stemmer u8 (0 none, 1 porter)
//!           | has_stopwords u8 | [count u32 | string*]
//! doc table count u32 | (doc_id string | length u32)*
//! postings  term_count u32 | (term string | n u32 | (ordinal u32 | tf u32)*)*
//! ```
//!
//! Terms are written in byte order, so the same index always serializes to
//! the same bytes.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use super::{InvertedIndex, Posting, Stemmer, Tokenizer};
use crate::error::{Error, Result};

pub const INDEX_MAGIC: &[u8; 8] = b"RELSTIDX";
pub const INDEX_VERSION: u32 = 1;

struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn str(&mut self, s: &str) {
        self.u32(s.len() as u32);
        self.0.extend_from_slice(s.as_bytes());
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| Error::validation(format!("index file truncated at byte {}", self.pos)))?;
        let out = &self.buf[self.pos..end];
        self.pos = end;
        Ok(out)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
    fn str(&mut self) -> Result<String> {
        let n = self.u32()? as usize;
        let at = self.pos;
        String::from_utf8(self.take(n)?.to_vec())
            .map_err(|_| Error::validation(format!("invalid UTF-8 string at byte {at}")))
    }
}

pub fn encode(index: &InvertedIndex) -> Vec<u8> {
    let mut w = Writer(Vec::new());
    w.0.extend_from_slice(INDEX_MAGIC);
    w.u32(INDEX_VERSION);

    let tok = index.tokenizer();
    w.u8(u8::from(tok.lowercase));
    w.u8(match tok.stemmer {
        Stemmer::None => 0,
        Stemmer::Porter => 1,
    });
    match &tok.stopwords {
        None => w.u8(0),
        Some(words) => {
            w.u8(1);
            w.u32(words.len() as u32);
            for s in words {
                w.str(s);
            }
        }
    }

    w.u32(index.doc_count() as u32);
    for (id, len) in index.doc_ids().iter().zip(index.doc_lengths()) {
        w.str(id);
        w.u32(*len);
    }

    let terms: Vec<_> = index.terms().collect();
    w.u32(terms.len() as u32);
    for (term, list) in terms {
        w.str(term);
        w.u32(list.len() as u32);
        for p in list {
            w.u32(p.ordinal);
            w.u32(p.tf);
        }
    }
    w.0
}

pub fn decode(bytes: &[u8]) -> Result<InvertedIndex> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(8).ok() != Some(INDEX_MAGIC.as_slice()) {
        return Err(Error::validation("not an index file (bad magic)"));
    }
    let version = r.u32()?;
    if version != INDEX_VERSION {
        return Err(Error::validation(format!(
            "unsupported index version {version} (expected {INDEX_VERSION})"
        )));
    }

    let lowercase = r.u8()? != 0;
    let stemmer = match r.u8()? {
        0 => Stemmer::None,
        1 => Stemmer::Porter,
        other => return Err(Error::validation(format!("unknown stemmer code {other}"))),
    };
    let stopwords = if r.u8()? != 0 {
        let n = r.u32()?;
        let mut set = BTreeSet::new();
        for _ in 0..n {
            set.insert(r.str()?);
        }
        Some(set)
    } else {
        None
    };

    let n_docs = r.u32()? as usize;
    let mut doc_ids = Vec::with_capacity(n_docs.min(1 << 20));
    let mut doc_lengths = Vec::with_capacity(n_docs.min(1 << 20));
    for _ in 0..n_docs {
        doc_ids.push(r.str()?);
        doc_lengths.push(r.u32()?);
    }

    let n_terms = r.u32()?;
    let mut postings = BTreeMap::new();
    for _ in 0..n_terms {
        let term = r.str()?;
        let n = r.u32()? as usize;
        let mut list = Vec::with_capacity(n.min(1 << 20));
        for _ in 0..n {
            list.push(Posting {
                ordinal: r.u32()?,
                tf: r.u32()?,
            });
        }
        postings.insert(term, list);
    }
    if r.pos != bytes.len() {
        return Err(Error::validation("trailing bytes after index postings"));
    }

    let tokenizer = Tokenizer {
        lowercase,
        stopwords,
        stemmer,
    };
    InvertedIndex::from_parts(tokenizer, postings, doc_ids, doc_lengths)
}

pub fn write_index(index: &InvertedIndex, path: &Path) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    std::fs::write(path, encode(index)).map_err(|e| Error::io(path, e))
}

pub fn read_index(path: &Path) -> Result<InvertedIndex> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}
