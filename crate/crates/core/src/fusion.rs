//! Weighted-average (WAM) fusion of topicality and credibility.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::credibility::CredibilityTable;
use crate::error::{Error, Result};
use crate::lexical::{minmax_normalize, rank_order, RankedList, ScoredDoc};
use crate::rerank::topic_credibility;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FusionConfig {
    pub w_topicality: f64,
    pub w_credibility: f64,
}

impl Default for FusionConfig {
    fn default() -> Self {
        FusionConfig {
            w_topicality: 0.5,
            w_credibility: 0.5,
        }
    }
}

impl FusionConfig {
    pub fn new(w_topicality: f64, w_credibility: f64) -> Result<Self> {
        let c = FusionConfig {
            w_topicality,
            w_credibility,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        let in_unit = |w: f64| (0.0..=1.0).contains(&w);
        if !in_unit(self.w_topicality) || !in_unit(self.w_credibility) {
            return Err(Error::validation(format!(
                "fusion weights must lie in [0, 1], got ({}, {})",
                self.w_topicality, self.w_credibility
            )));
        }
        if (self.w_topicality + self.w_credibility - 1.0).abs() > 1e-9 {
            return Err(Error::validation(format!(
                "fusion weights must sum to 1, got {}",
                self.w_topicality + self.w_credibility
            )));
        }
        Ok(())
    }
}

/// Fuses an already-normalized topicality list with per-document
/// credibility values: `w_t·topicality + w_c·credibility`, re-sorted.
pub fn wam(topicality: &RankedList, credibility: &HashMap<&str, f64>, config: FusionConfig) -> Result<RankedList> {
    config.validate()?;
    let mut items = Vec::with_capacity(topicality.len());
    for it in &topicality.items {
        let c = credibility.get(it.doc_id.as_str()).ok_or_else(|| {
            Error::validation(format!(
                "missing credibility for topic \"{}\" doc \"{}\"",
                topicality.topic_id, it.doc_id
            ))
        })?;
        items.push(ScoredDoc {
            doc_id: it.doc_id.clone(),
            score: config.w_topicality * it.score + config.w_credibility * c,
        });
    }
    items.sort_by(rank_order);
    Ok(RankedList {
        topic_id: topicality.topic_id.clone(),
        items,
    })
}

/// WAM over a raw first-stage list: min-max normalizes BM25 and credibility
/// within the topic, then fuses.
pub fn wam_topic(first_stage: &RankedList, cred: &CredibilityTable, config: FusionConfig) -> Result<RankedList> {
    config.validate()?;
    if first_stage.is_empty() {
        return Ok(first_stage.clone());
    }
    let topicality = minmax_normalize(first_stage)?;
    let creds = topic_credibility(first_stage, cred, true)?;
    let map: HashMap<&str, f64> = first_stage.items.iter().map(|i| i.doc_id.as_str()).zip(creds).collect();
    wam(&topicality, &map, config)
}

pub fn wam_run(first_stage: &[RankedList], cred: &CredibilityTable, config: FusionConfig) -> Result<Vec<RankedList>> {
    first_stage.iter().map(|l| wam_topic(l, cred, config)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn list(items: &[(&str, f64)]) -> RankedList {
        RankedList::new(
            "t",
            items
                .iter()
                .map(|(d, s)| ScoredDoc {
                    doc_id: d.to_string(),
                    score: *s,
                })
                .collect(),
        )
    }

    #[test]
    fn even_split() {
        let t = list(&[("a", 0.8)]);
        let c = HashMap::from([("a", 0.4)]);
        let out = wam(&t, &c, FusionConfig::default()).unwrap();
        assert!((out.items[0].score - 0.6).abs() < 1e-12);
    }

    #[test]
    fn topicality_only_keeps_order() {
        let t = list(&[("a", 1.0), ("b", 0.7), ("c", 0.2)]);
        let c = HashMap::from([("a", 0.0), ("b", 1.0), ("c", 0.9)]);
        let out = wam(&t, &c, FusionConfig::new(1.0, 0.0).unwrap()).unwrap();
        assert_eq!(out.doc_ids(), t.doc_ids());
        let out = wam(&t, &c, FusionConfig::new(0.0, 1.0).unwrap()).unwrap();
        assert_eq!(out.doc_ids(), vec!["b", "c", "a"]);
    }

    #[test]
    fn compensation_effect() {
        // a: very topical, barely credible; b: balanced
        let t = list(&[("a", 1.0), ("b", 0.6)]);
        let c = HashMap::from([("a", 0.1), ("b", 0.45)]);
        let out = wam(&t, &c, FusionConfig::default()).unwrap();
        assert_eq!(out.doc_ids(), vec!["a", "b"]);
    }

    #[test]
    fn errors() {
        assert!(FusionConfig::new(0.6, 0.6).is_err());
        assert!(FusionConfig::new(1.2, -0.2).is_err());
        let t = list(&[("a", 1.0)]);
        assert!(wam(&t, &HashMap::new(), FusionConfig::default()).is_err());
    }
}
