//! Deterministic synthetic consumer-health collection: topics, documents
//! that are topical and/or credible, an evidence corpus of scientific-style
//! articles, and qrels that mark a document relevant only when it is both
//! topical and credible.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus_io::{write_jsonl, Document, EvidenceArticle, QrelEntry, Topic};
use crate::error::{Error, Result};

const SUBJECTS: &[(&str, &str)] = &[
    ("vitamin c", "common cold"),
    ("bcg vaccine", "covid"),
    ("zinc lozenges", "sore throat"),
    ("ibuprofen", "fever"),
    ("garlic extract", "blood pressure"),
    ("honey", "cough"),
    ("echinacea", "influenza"),
    ("face masks", "virus transmission"),
    ("melatonin", "insomnia"),
    ("probiotics", "diarrhea"),
    ("fish oil", "heart disease"),
    ("acupuncture", "migraine"),
];

const CREDIBLE: &[&str] = &[
    "randomized",
    "controlled",
    "trial",
    "evidence",
    "systematic",
    "review",
    "cohort",
    "placebo",
    "efficacy",
    "peer",
    "reviewed",
    "participants",
    "statistically",
    "significant",
    "clinical",
    "guidelines",
    "meta",
    "analysis",
    "confidence",
    "interval",
    "researchers",
    "observed",
    "outcomes",
    "dosage",
    "adverse",
    "effects",
    "moderate",
    "data",
    "published",
    "journal",
];

const NON_CREDIBLE: &[&str] = &[
    "miracle",
    "cure",
    "secret",
    "doctors",
    "hate",
    "detox",
    "instantly",
    "guaranteed",
    "toxins",
    "pharma",
    "shocking",
    "truth",
    "hidden",
    "amazing",
    "forever",
    "banned",
    "natural",
    "remedy",
    "overnight",
    "trick",
    "exposed",
    "wonder",
    "ancient",
    "powerful",
    "everyone",
    "never",
    "totally",
    "share",
    "viral",
    "proven",
];

const FILLER: &[&str] = &[
    "people",
    "many",
    "often",
    "also",
    "may",
    "some",
    "health",
    "body",
    "daily",
    "week",
    "use",
    "used",
    "common",
    "patients",
    "people",
    "help",
    "helps",
    "taking",
    "reported",
    "symptoms",
    "time",
    "found",
    "work",
    "years",
    "experts",
    "information",
    "treatment",
    "recommend",
    "other",
    "most",
    "good",
    "better",
    "know",
    "think",
    "family",
    "children",
    "adults",
    "home",
    "care",
];

const OFF_TOPIC: &[&str] = &[
    "football",
    "recipe",
    "garden",
    "stock",
    "market",
    "holiday",
    "travel",
    "car",
    "engine",
    "music",
    "concert",
    "weather",
    "election",
    "movie",
    "game",
    "software",
    "phone",
    "fashion",
    "furniture",
    "hotel",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub seed: u64,
    pub topics: usize,
    /// Topical documents per topic.
    pub docs_per_topic: usize,
    /// Share of topical documents written in a credible register.
    pub credible_fraction: f64,
    /// Documents about nothing in particular.
    pub noise_docs: usize,
    pub evidence_per_topic: usize,
    pub noise_evidence: usize,
}

impl Default for SynthConfig {
    /// 5 topics x 32 topical documents + 40 noise documents = 200 documents.
    fn default() -> Self {
        SynthConfig {
            seed: 20_200,
            topics: 5,
            docs_per_topic: 32,
            credible_fraction: 0.5,
            noise_docs: 40,
            evidence_per_topic: 4,
            noise_evidence: 6,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthCollection {
    pub topics: Vec<Topic>,
    pub documents: Vec<Document>,
    pub evidence: Vec<EvidenceArticle>,
    pub qrels: Vec<QrelEntry>,
}

fn pick<'a>(rng: &mut ChaCha8Rng, words: &[&'a str], count: std::ops::RangeInclusive<u32>) -> Vec<&'a str> {
    // u32, not usize: usize sampling differs between 32- and 64-bit targets
    let n = rng.gen_range(count);
    (0..n).map(|_| *words.choose(rng).expect("non-empty list")).collect()
}

fn sentence(rng: &mut ChaCha8Rng, parts: Vec<&str>) -> String {
    let mut words: Vec<&str> = parts.iter().flat_map(|p| p.split_whitespace()).collect();
    words.shuffle(rng);
    words.join(" ")
}

impl SynthCollection {
    pub fn generate(config: &SynthConfig) -> Result<Self> {
        if config.topics == 0 || config.topics > SUBJECTS.len() {
            return Err(Error::validation(format!("topics must be in 1..={}", SUBJECTS.len())));
        }
        if !(0.0..=1.0).contains(&config.credible_fraction) {
            return Err(Error::validation("credible_fraction must be in [0, 1]"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut topics = Vec::new();
        let mut documents = Vec::new();
        let mut evidence = Vec::new();
        let mut labels: Vec<(String, String, u8)> = Vec::new();

        for (ti, (treatment, condition)) in SUBJECTS.iter().take(config.topics).enumerate() {
            let topic_id = format!("{}", 101 + ti);
            topics.push(Topic::new(&topic_id, format!("can {treatment} treat {condition}")));

            let n_credible = (config.docs_per_topic as f64 * config.credible_fraction).round() as usize;
            for di in 0..config.docs_per_topic {
                let credible = di < n_credible;
                let register = if credible { CREDIBLE } else { NON_CREDIBLE };
                let topical_mentions: u32 = rng.gen_range(1..=3);
                let mut parts = Vec::new();
                for _ in 0..topical_mentions {
                    parts.push(*treatment);
                    if rng.gen_bool(0.7) {
                        parts.push(*condition);
                    }
                }
                parts.extend(pick(&mut rng, register, 8..=20));
                parts.extend(pick(&mut rng, FILLER, 10..=40));
                let doc_id = format!("doc-{topic_id}-{di:03}");
                documents.push(Document::new(&doc_id, sentence(&mut rng, parts)));
                labels.push((topic_id.clone(), doc_id, u8::from(credible)));
            }

            for ei in 0..config.evidence_per_topic {
                let mut parts = vec![*treatment, *condition];
                parts.extend(pick(&mut rng, CREDIBLE, 15..=30));
                parts.extend(pick(&mut rng, FILLER, 5..=15));
                evidence.push(EvidenceArticle::new(
                    format!("pmc-{topic_id}-{ei:02}"),
                    sentence(&mut rng, parts),
                ));
            }
        }

        for ni in 0..config.noise_docs {
            let mut parts = pick(&mut rng, OFF_TOPIC, 5..=15);
            parts.extend(pick(&mut rng, FILLER, 10..=30));
            if rng.gen_bool(0.5) {
                parts.extend(pick(&mut rng, NON_CREDIBLE, 2..=8));
            } else {
                parts.extend(pick(&mut rng, CREDIBLE, 2..=8));
            }
            // a stray subject word so some noise reaches the first stage
            let (t, c) = SUBJECTS[rng.gen_range(0..config.topics as u32) as usize];
            parts.push(if rng.gen_bool(0.5) { t } else { c });
            documents.push(Document::new(format!("doc-noise-{ni:03}"), sentence(&mut rng, parts)));
        }
        for ni in 0..config.noise_evidence {
            let mut parts = pick(&mut rng, CREDIBLE, 10..=20);
            parts.extend(pick(&mut rng, OFF_TOPIC, 5..=10));
            evidence.push(EvidenceArticle::new(
                format!("pmc-noise-{ni:02}"),
                sentence(&mut rng, parts),
            ));
        }

        // every topic judges every topical document; only its own credible
        // documents are relevant
        let mut qrels = Vec::new();
        for topic in &topics {
            for (t, d, credible) in &labels {
                let label = u8::from(t == &topic.topic_id && *credible == 1);
                qrels.push(QrelEntry {
                    topic_id: topic.topic_id.clone(),
                    doc_id: d.clone(),
                    label,
                });
            }
        }

        Ok(SynthCollection {
            topics,
            documents,
            evidence,
            qrels,
        })
    }

    /// Writes `corpus.jsonl`, `topics.jsonl`, `evidence.jsonl`, `qrels.txt`.
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_jsonl(&self.documents, &dir.join("corpus.jsonl"))?;
        write_jsonl(&self.topics, &dir.join("topics.jsonl"))?;
        write_jsonl(&self.evidence, &dir.join("evidence.jsonl"))?;
        let qrels: String = self
            .qrels
            .iter()
            .map(|q| format!("{} 0 {} {}\n", q.topic_id, q.doc_id, q.label))
            .collect();
        let path = dir.join("qrels.txt");
        std::fs::write(&path, qrels).map_err(|e| Error::io(&path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_shape() {
        let c = SynthCollection::generate(&SynthConfig::default()).unwrap();
        assert_eq!(c.documents.len(), 200);
        assert_eq!(c.topics.len(), 5);
        assert_eq!(c.qrels.iter().filter(|q| q.label == 1).count(), 5 * 16);
    }

    #[test]
    fn deterministic() {
        let a = SynthCollection::generate(&SynthConfig::default()).unwrap();
        let b = SynthCollection::generate(&SynthConfig::default()).unwrap();
        assert_eq!(a, b);
    }
}
