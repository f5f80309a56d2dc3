//! Cross-encoder input construction and re-ranking.
//!
//! Inputs are segment lists; the scorer joins them with its own separator
//! and wraps them with classifier/terminal tokens:
//!
//! | variant       | segments                         |
//! |---------------|----------------------------------|
//! | `plain_ce`    | `[q, d]`                         |
//! | `bm25cat`     | `[q, bm25, d]`                   |
//! | `credcat`     | `[q, cred, d]`                   |
//! | `bm25credcat` | `[q, bm25, cred, d]`             |
//! | `rel_score`   | `[q, "<cred> " + d]`             |
//! | `rel_stat`    | `[q, "<statement> " + d]`        |

#[cfg(feature = "remote")]
pub mod remote;
mod scorer;

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus_io::{Document, Topic};
use crate::credibility::CredibilityTable;
use crate::enhancement::{enhance_document, format_score, EnhancedDocument, ScoreRepresentation, StatementTemplate};
use crate::error::{Error, Result};
use crate::lexical::{minmax_normalize, rank_order, RankedList, ScoredDoc, DEFAULT_DEPTH};

pub use scorer::{
    score_batch, stub_score, Backend, ScorerHandle, DEFAULT_BATCH_SIZE, DEFAULT_MAX_IN_FLIGHT, STUB_JITTER,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputVariant {
    PlainCe,
    #[serde(rename = "bm25cat")]
    Bm25Cat,
    #[serde(rename = "credcat")]
    CredCat,
    #[serde(rename = "bm25credcat")]
    Bm25CredCat,
    RelScore,
    RelStat,
}

impl InputVariant {
    pub fn id(self) -> &'static str {
        match self {
            InputVariant::PlainCe => "plain_ce",
            InputVariant::Bm25Cat => "bm25cat",
            InputVariant::CredCat => "credcat",
            InputVariant::Bm25CredCat => "bm25credcat",
            InputVariant::RelScore => "rel_score",
            InputVariant::RelStat => "rel_stat",
        }
    }

    pub fn all() -> [InputVariant; 6] {
        [
            InputVariant::PlainCe,
            InputVariant::Bm25Cat,
            InputVariant::CredCat,
            InputVariant::Bm25CredCat,
            InputVariant::RelScore,
            InputVariant::RelStat,
        ]
    }

    fn takes_bm25(self) -> bool {
        matches!(self, InputVariant::Bm25Cat | InputVariant::Bm25CredCat)
    }

    fn takes_cred(self) -> bool {
        matches!(self, InputVariant::CredCat | InputVariant::Bm25CredCat)
    }

    fn enhances(self) -> bool {
        matches!(self, InputVariant::RelScore | InputVariant::RelStat)
    }
}

impl fmt::Display for InputVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for InputVariant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        InputVariant::all()
            .into_iter()
            .find(|v| v.id() == s)
            .ok_or_else(|| Error::validation(format!("unknown input variant {s:?}")))
    }
}

/// Ordered, non-empty text segments; the first is the query.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScorerInput {
    segments: Vec<String>,
}

impl ScorerInput {
    pub fn new(segments: Vec<String>) -> Result<Self> {
        if segments.len() < 2 {
            return Err(Error::validation("scorer input needs at least 2 segments"));
        }
        if let Some(i) = segments.iter().position(|s| s.trim().is_empty()) {
            return Err(Error::validation(format!("scorer input segment {i} is empty")));
        }
        Ok(ScorerInput { segments })
    }

    pub fn segments(&self) -> &[String] {
        &self.segments
    }
}

/// Builds the segment layout for `variant`. For `rel_score`/`rel_stat`,
/// `doc_text` must already carry its prefix and no score strings are
/// accepted.
pub fn build_input(
    variant: InputVariant,
    query: &Topic,
    doc_text: &str,
    bm25: Option<&str>,
    cred: Option<&str>,
) -> Result<ScorerInput> {
    let check = |wanted: bool, got: Option<&str>, name: &str| -> Result<()> {
        match (wanted, got) {
            (true, None) => Err(Error::validation(format!("variant {variant} needs a {name} score"))),
            (false, Some(_)) => Err(Error::validation(format!("variant {variant} takes no {name} score"))),
            _ => Ok(()),
        }
    };
    check(variant.takes_bm25(), bm25, "bm25")?;
    check(variant.takes_cred(), cred, "credibility")?;

    let mut segments = vec![query.text.clone()];
    segments.extend(bm25.map(str::to_string));
    segments.extend(cred.map(str::to_string));
    segments.push(doc_text.to_string());
    ScorerInput::new(segments)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RerankRunConfig {
    pub variant: InputVariant,
    pub representation: ScoreRepresentation,
    /// Statement template; required by `rel_stat`, ignored by the CAT
    /// variants and `plain_ce`, implicitly `score_only` for `rel_score`.
    pub template: Option<StatementTemplate>,
    pub first_stage_n: usize,
    pub tag: String,
    /// Min-max normalize credibility per topic before rendering it.
    #[serde(default)]
    pub normalize_credibility: bool,
}

impl RerankRunConfig {
    pub fn new(variant: InputVariant) -> Self {
        RerankRunConfig {
            variant,
            representation: ScoreRepresentation::default(),
            template: match variant {
                InputVariant::RelStat => Some(StatementTemplate::C2),
                _ => None,
            },
            first_stage_n: DEFAULT_DEPTH,
            tag: variant.id().to_string(),
            normalize_credibility: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.representation.validate()?;
        if self.first_stage_n == 0 {
            return Err(Error::validation("first_stage_n must be at least 1"));
        }
        if self.tag.is_empty() || self.tag.contains(char::is_whitespace) {
            return Err(Error::validation(format!("invalid run tag {:?}", self.tag)));
        }
        match (self.variant, self.template) {
            (InputVariant::RelStat, None) => Err(Error::validation("rel_stat requires a statement template")),
            (InputVariant::RelStat, Some(StatementTemplate::ScoreOnly)) => Err(Error::validation(
                "rel_stat needs a textual template; use rel_score for bare scores",
            )),
            (InputVariant::RelScore, Some(t)) if t != StatementTemplate::ScoreOnly => {
                Err(Error::validation(format!("rel_score cannot use template {t}")))
            }
            _ => Ok(()),
        }
    }

    /// The template actually applied to documents, if any.
    pub fn effective_template(&self) -> Option<StatementTemplate> {
        match self.variant {
            InputVariant::RelStat => self.template,
            InputVariant::RelScore => Some(StatementTemplate::ScoreOnly),
            _ => None,
        }
    }

    pub fn needs_credibility(&self) -> bool {
        self.variant.takes_cred()
            || self
                .effective_template()
                .is_some_and(StatementTemplate::needs_credibility)
    }
}

/// Per-topic credibility values for the documents of `list`, optionally
/// min-max normalized within the topic (constant lists map to 1.0).
pub fn topic_credibility(list: &RankedList, cred: &CredibilityTable, normalize: bool) -> Result<Vec<f64>> {
    let raw = list
        .items
        .iter()
        .map(|it| cred.require(&list.topic_id, &it.doc_id))
        .collect::<Result<Vec<f64>>>()?;
    if !normalize || raw.is_empty() {
        return Ok(raw);
    }
    let as_list = RankedList {
        topic_id: list.topic_id.clone(),
        items: list
            .items
            .iter()
            .zip(&raw)
            .map(|(it, &c)| ScoredDoc {
                doc_id: it.doc_id.clone(),
                score: c,
            })
            .collect(),
    };
    Ok(minmax_normalize(&as_list)?.items.into_iter().map(|i| i.score).collect())
}

/// Enhanced documents for a first-stage list, in list order. Topicality is
/// the min-max normalized first-stage score.
pub fn enhance_list(
    list: &RankedList,
    corpus: &HashMap<&str, &Document>,
    cred: Option<&CredibilityTable>,
    template: StatementTemplate,
    repr: ScoreRepresentation,
    normalize_credibility: bool,
) -> Result<Vec<EnhancedDocument>> {
    if list.is_empty() {
        return Ok(Vec::new());
    }
    let topicality = minmax_normalize(list)?;
    let creds = if template.needs_credibility() {
        let table = cred.ok_or_else(|| Error::validation(format!("template {template} needs credibility scores")))?;
        Some(topic_credibility(list, table, normalize_credibility)?)
    } else {
        None
    };
    list.items
        .iter()
        .enumerate()
        .map(|(i, item)| {
            let doc = corpus
                .get(item.doc_id.as_str())
                .ok_or_else(|| Error::validation(format!("doc \"{}\" not in corpus", item.doc_id)))?;
            enhance_document(
                &list.topic_id,
                doc,
                template,
                repr,
                creds.as_ref().map(|c| c[i]),
                Some(topicality.items[i].score),
            )
        })
        .collect()
}

/// Scorer inputs for every document of a first-stage list, in list order.
pub fn topic_inputs(
    config: &RerankRunConfig,
    topic: &Topic,
    first_stage: &RankedList,
    corpus: &HashMap<&str, &Document>,
    cred: Option<&CredibilityTable>,
) -> Result<Vec<ScorerInput>> {
    config.validate()?;
    if first_stage.is_empty() {
        return Ok(Vec::new());
    }
    let list = RankedList {
        topic_id: first_stage.topic_id.clone(),
        items: first_stage.items.iter().take(config.first_stage_n).cloned().collect(),
    };
    let topicality = minmax_normalize(&list)?;
    let creds = if config.needs_credibility() {
        let table =
            cred.ok_or_else(|| Error::validation(format!("variant {} needs credibility scores", config.variant)))?;
        Some(topic_credibility(&list, table, config.normalize_credibility)?)
    } else {
        None
    };

    let repr = config.representation;
    let mut inputs = Vec::with_capacity(list.len());
    for (i, item) in list.items.iter().enumerate() {
        let doc = corpus.get(item.doc_id.as_str()).ok_or_else(|| {
            Error::validation(format!(
                "topic \"{}\": doc \"{}\" not in corpus",
                topic.topic_id, item.doc_id
            ))
        })?;
        let c = creds.as_ref().map(|c| c[i]);
        let top = topicality.items[i].score;
        let input = if config.variant.enhances() {
            let template = config.effective_template().expect("validated");
            let enhanced = enhance_document(&topic.topic_id, doc, template, repr, c, Some(top))?;
            build_input(config.variant, topic, &enhanced.enhanced_text, None, None)?
        } else {
            let bm25 = config
                .variant
                .takes_bm25()
                .then(|| format_score(top, repr))
                .transpose()?;
            let cred_str = config
                .variant
                .takes_cred()
                .then(|| format_score(c.expect("credibility loaded"), repr))
                .transpose()?;
            build_input(config.variant, topic, &doc.text, bm25.as_deref(), cred_str.as_deref())?
        };
        inputs.push(input);
    }
    Ok(inputs)
}

/// Re-scores every first-stage document and sorts by scorer output, ties by
/// doc_id.
pub fn rerank_topic(
    config: &RerankRunConfig,
    topic: &Topic,
    first_stage: &RankedList,
    corpus: &HashMap<&str, &Document>,
    cred: Option<&CredibilityTable>,
    handle: &ScorerHandle,
) -> Result<RankedList> {
    let inputs = topic_inputs(config, topic, first_stage, corpus, cred)?;
    let scores = score_batch(handle, &inputs)?;
    if scores.len() != inputs.len() {
        return Err(Error::Protocol(format!(
            "{} scores for {} inputs",
            scores.len(),
            inputs.len()
        )));
    }
    let mut items: Vec<ScoredDoc> = first_stage
        .items
        .iter()
        .take(config.first_stage_n)
        .zip(scores)
        .map(|(it, score)| ScoredDoc {
            doc_id: it.doc_id.clone(),
            score,
        })
        .collect();
    if let Some(bad) = items.iter().find(|i| !i.score.is_finite()) {
        return Err(Error::Protocol(format!("non-finite score for doc \"{}\"", bad.doc_id)));
    }
    items.sort_by(rank_order);
    Ok(RankedList {
        topic_id: first_stage.topic_id.clone(),
        items,
    })
}

/// Re-ranks every topic of a first-stage run.
pub fn rerank_run(
    config: &RerankRunConfig,
    topics: &[Topic],
    first_stage: &[RankedList],
    corpus: &[Document],
    cred: Option<&CredibilityTable>,
    handle: &ScorerHandle,
) -> Result<Vec<RankedList>> {
    let corpus: HashMap<&str, &Document> = corpus.iter().map(|d| (d.doc_id.as_str(), d)).collect();
    let topic_map: HashMap<&str, &Topic> = topics.iter().map(|t| (t.topic_id.as_str(), t)).collect();
    first_stage
        .iter()
        .map(|list| {
            let topic = topic_map
                .get(list.topic_id.as_str())
                .ok_or_else(|| Error::validation(format!("run topic \"{}\" not in topics file", list.topic_id)))?;
            rerank_topic(config, topic, list, &corpus, cred, handle)
        })
        .collect()
}
