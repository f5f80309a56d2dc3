use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stemmer {
    #[default]
    None,
    Porter,
}

/// Splits text on maximal runs of non-alphanumeric characters, then applies
/// lowercasing, stopword removal and stemming, in that order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tokenizer {
    pub lowercase: bool,
    pub stopwords: Option<BTreeSet<String>>,
    pub stemmer: Stemmer,
}

impl Default for Tokenizer {
    fn default() -> Self {
        Tokenizer {
            lowercase: true,
            stopwords: None,
            stemmer: Stemmer::None,
        }
    }
}

impl Tokenizer {
    pub fn with_stopwords(mut self, words: impl IntoIterator<Item = impl Into<String>>) -> Self {
        self.stopwords = Some(words.into_iter().map(Into::into).collect());
        self
    }

    pub fn with_stemmer(mut self, stemmer: Stemmer) -> Self {
        self.stemmer = stemmer;
        self
    }

    pub fn tokenize(&self, text: &str) -> Vec<String> {
        text.split(|c: char| !c.is_alphanumeric())
            .filter(|s| !s.is_empty())
            .map(|s| {
                if self.lowercase {
                    s.to_lowercase()
                } else {
                    s.to_string()
                }
            })
            .filter(|t| self.stopwords.as_ref().is_none_or(|sw| !sw.contains(t)))
            .map(|t| match self.stemmer {
                Stemmer::None => t,
                Stemmer::Porter => porter_stemmer::stem(&t),
            })
            .collect()
    }
}

/// A short English stopword list (articles, pronouns, auxiliaries,
/// prepositions).
pub const ENGLISH_STOPWORDS: &[&str] = &[
    "a", "about", "an", "and", "are", "as", "at", "be", "been", "but", "by", "can", "do", "does", "for", "from", "had",
    "has", "have", "he", "her", "his", "how", "i", "if", "in", "into", "is", "it", "its", "of", "on", "or", "our",
    "she", "so", "such", "than", "that", "the", "their", "them", "then", "there", "these", "they", "this", "to", "was",
    "we", "were", "what", "when", "which", "who", "will", "with", "would", "you", "your",
];
