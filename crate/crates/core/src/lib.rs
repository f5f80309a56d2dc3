//! Two-stage retrieval: a BM25 first stage, evidence-based credibility
//! scores, relevance-statement document enhancement and cross-encoder
//! style re-ranking, with evaluation and significance testing.

pub mod corpus_io;
pub mod credibility;
pub mod enhancement;
pub mod error;
pub mod evaluation;
pub mod fusion;
pub mod lexical;
pub mod pipeline;
pub mod rerank;
pub mod synth;

pub use error::{Error, Result};
