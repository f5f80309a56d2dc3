//! Browser bindings. Each exported function takes plain values and returns
//! a JSON string; the native functions underneath are tested directly.

use std::collections::HashMap;
use std::sync::OnceLock;

use relstat_core::corpus_io::{Document, Topic};
use relstat_core::credibility::{
    cosine, make_weights, score_credibility, score_run, CredibilityConfig, CredibilityTable, Embedding,
    HashingEmbedder, WeightSchedule,
};
use relstat_core::enhancement::{format_score, render_statement, ScoreRepresentation, StatementTemplate};
use relstat_core::evaluation::evaluate_lists;
use relstat_core::fusion::{wam_run, FusionConfig};
use relstat_core::lexical::{retrieve, Bm25Params, InvertedIndex, RankedList, Tokenizer};
use relstat_core::rerank::{build_input, rerank_run, InputVariant, RerankRunConfig, ScorerHandle};
use relstat_core::synth::{SynthCollection, SynthConfig};
use relstat_core::Result;
use serde::Serialize;
use wasm_bindgen::prelude::*;

#[derive(Debug, Serialize)]
pub struct Layout {
    pub variant: String,
    pub segments: Vec<String>,
}

#[derive(Debug, Serialize)]
pub struct StatementPreview {
    pub credibility: String,
    pub topicality: String,
    pub statement: String,
    pub layouts: Vec<Layout>,
}

/// Formats both scores, renders the statement and shows every input layout
/// for one query/document pair.
pub fn statement_preview(
    cred: f64,
    topicality: f64,
    repr: &str,
    template: &str,
    query: &str,
    doc: &str,
) -> Result<StatementPreview> {
    let repr: ScoreRepresentation = repr.parse()?;
    let template: StatementTemplate = template.parse()?;
    let x = format_score(cred, repr)?;
    let y = format_score(topicality, repr)?;
    let statement = render_statement(
        template,
        template.needs_credibility().then_some(x.as_str()),
        template.needs_topicality().then_some(y.as_str()),
    )?;
    let topic = Topic::new("q", query);
    let mut layouts = Vec::new();
    for v in InputVariant::all() {
        let input = match v {
            InputVariant::PlainCe => build_input(v, &topic, doc, None, None)?,
            InputVariant::Bm25Cat => build_input(v, &topic, doc, Some(&y), None)?,
            InputVariant::CredCat => build_input(v, &topic, doc, None, Some(&x))?,
            InputVariant::Bm25CredCat => build_input(v, &topic, doc, Some(&y), Some(&x))?,
            InputVariant::RelScore => build_input(v, &topic, &format!("{x} {doc}"), None, None)?,
            InputVariant::RelStat => build_input(v, &topic, &format!("{statement} {doc}"), None, None)?,
        };
        layouts.push(Layout {
            variant: v.id().to_string(),
            segments: input.segments().to_vec(),
        });
    }
    Ok(StatementPreview {
        credibility: x,
        topicality: y,
        statement,
        layouts,
    })
}

#[derive(Debug, Serialize)]
pub struct CredibilityPreview {
    pub weights: Vec<f64>,
    pub cosines: Vec<f64>,
    pub score: f64,
}

/// Weights for `k` evidence articles under `schedule`, and the credibility
/// of a document whose cosines to the ranked evidence are given. Fewer
/// cosines than `k` uses the renormalized leading weights.
pub fn credibility_preview(k: usize, schedule: &str, cosines: &[f64]) -> Result<CredibilityPreview> {
    let schedule: WeightSchedule = schedule.parse()?;
    let weights = make_weights(k, &schedule)?;
    if cosines.is_empty() || cosines.len() > k {
        return Err(relstat_core::Error::validation(format!("need 1..={k} cosines")));
    }
    if let Some(c) = cosines.iter().find(|c| !(-1.0..=1.0).contains(*c)) {
        return Err(relstat_core::Error::validation(format!("cosine {c} outside [-1, 1]")));
    }
    let used = weights.truncated(cosines.len())?;
    // unit vectors in the plane with the requested cosines to e1
    let doc = Embedding::new(vec![1.0, 0.0])?;
    let evidence: Vec<Embedding> = cosines
        .iter()
        .map(|c| Embedding::new(vec![*c, (1.0 - c * c).max(0.0).sqrt()]))
        .collect::<Result<_>>()?;
    let realized: Vec<f64> = evidence.iter().map(|e| cosine(&doc, e)).collect::<Result<_>>()?;
    Ok(CredibilityPreview {
        weights: weights.as_slice().to_vec(),
        cosines: realized,
        score: score_credibility(&doc, &evidence, &used)?,
    })
}

struct Experiment {
    first_stage: Vec<RankedList>,
    cred: CredibilityTable,
    collection: SynthCollection,
    bm25_ndcg: f64,
    plain_ce_ndcg: f64,
    rel_stat_ndcg: f64,
}

fn build_experiment() -> Result<Experiment> {
    let collection = SynthCollection::generate(&SynthConfig::default())?;
    let tok = Tokenizer::default();
    let index = InvertedIndex::build(&collection.documents, &tok)?;
    let ev_docs: Vec<Document> = collection.evidence.iter().map(|a| a.as_document()).collect();
    let ev_index = InvertedIndex::build(&ev_docs, &tok)?;
    let params = Bm25Params::default();
    let first_stage = collection
        .topics
        .iter()
        .map(|t| retrieve(&index, t, 500, params))
        .collect::<Result<Vec<_>>>()?;
    let corpus: HashMap<&str, &Document> = collection.documents.iter().map(|d| (d.doc_id.as_str(), d)).collect();
    let scores = score_run(
        &collection.topics,
        &first_stage,
        &corpus,
        &collection.evidence,
        &ev_index,
        &CredibilityConfig::default(),
        &HashingEmbedder::default(),
    )?;
    let cred = CredibilityTable::new(scores)?;
    let handle = ScorerHandle::stub(0);
    let ndcg = |lists: &[RankedList]| -> Result<f64> { Ok(evaluate_lists("x", lists, &collection.qrels)?.mean.ndcg10) };
    let rerank = |v: InputVariant| -> Result<f64> {
        let lists = rerank_run(
            &RerankRunConfig::new(v),
            &collection.topics,
            &first_stage,
            &collection.documents,
            Some(&cred),
            &handle,
        )?;
        ndcg(&lists)
    };
    let plain_ce_ndcg = rerank(InputVariant::PlainCe)?;
    let rel_stat_ndcg = rerank(InputVariant::RelStat)?;
    let bm25_ndcg = ndcg(&first_stage)?;
    Ok(Experiment {
        first_stage,
        cred,
        collection,
        bm25_ndcg,
        plain_ce_ndcg,
        rel_stat_ndcg,
    })
}

fn experiment() -> Result<&'static Experiment> {
    static CELL: OnceLock<Experiment> = OnceLock::new();
    if let Some(e) = CELL.get() {
        return Ok(e);
    }
    let e = build_experiment()?;
    Ok(CELL.get_or_init(|| e))
}

#[derive(Debug, Serialize)]
pub struct WamPoint {
    pub w_topicality: f64,
    pub ndcg10: f64,
    pub bm25_ndcg10: f64,
    pub plain_ce_ndcg10: f64,
    pub rel_stat_ndcg10: f64,
    /// Top 10 of the first topic: (doc_id, relevant).
    pub top: Vec<(String, bool)>,
    pub topic: String,
}

/// WAM fusion at `w_topicality` (credibility weight `1 - w`) on the bundled
/// synthetic collection, next to the stub re-rankers.
pub fn wam_point(w_topicality: f64) -> Result<WamPoint> {
    let e = experiment()?;
    let fusion = FusionConfig::new(w_topicality, 1.0 - w_topicality)?;
    let fused = wam_run(&e.first_stage, &e.cred, fusion)?;
    let ndcg10 = evaluate_lists("wam", &fused, &e.collection.qrels)?.mean.ndcg10;
    let first = &fused[0];
    let top = first
        .items
        .iter()
        .take(10)
        .map(|it| {
            let rel = e
                .collection
                .qrels
                .iter()
                .any(|q| q.topic_id == first.topic_id && q.doc_id == it.doc_id && q.label == 1);
            (it.doc_id.clone(), rel)
        })
        .collect();
    let topic = e.collection.topics[0].text.clone();
    Ok(WamPoint {
        w_topicality,
        ndcg10,
        bm25_ndcg10: e.bm25_ndcg,
        plain_ce_ndcg10: e.plain_ce_ndcg,
        rel_stat_ndcg10: e.rel_stat_ndcg,
        top,
        topic,
    })
}

fn to_js<T: Serialize>(r: Result<T>) -> std::result::Result<String, JsValue> {
    r.map_err(|e| JsValue::from_str(&e.to_string()))
        .and_then(|v| serde_json::to_string(&v).map_err(|e| JsValue::from_str(&e.to_string())))
}

#[wasm_bindgen(js_name = statementPreview)]
pub fn statement_preview_js(
    cred: f64,
    topicality: f64,
    repr: &str,
    template: &str,
    query: &str,
    doc: &str,
) -> std::result::Result<String, JsValue> {
    to_js(statement_preview(cred, topicality, repr, template, query, doc))
}

#[wasm_bindgen(js_name = credibilityPreview)]
pub fn credibility_preview_js(k: usize, schedule: &str, cosines: Vec<f64>) -> std::result::Result<String, JsValue> {
    to_js(credibility_preview(k, schedule, &cosines))
}

#[wasm_bindgen(js_name = wamPoint)]
pub fn wam_point_js(w_topicality: f64) -> std::result::Result<String, JsValue> {
    to_js(wam_point(w_topicality))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preview_layouts() {
        let p = statement_preview(0.2845, 0.731, "decimal:4", "c2", "flu shots", "text").unwrap();
        assert_eq!(p.statement, "Credibility score of the document is 0.2845");
        let stat = p.layouts.iter().find(|l| l.variant == "rel_stat").unwrap();
        assert_eq!(
            stat.segments,
            ["flu shots", "Credibility score of the document is 0.2845 text"]
        );
        let cat = p.layouts.iter().find(|l| l.variant == "bm25credcat").unwrap();
        assert_eq!(cat.segments, ["flu shots", "0.7310", "0.2845", "text"]);
        assert!(statement_preview(0.1, 0.1, "decimal:9", "c2", "q", "d").is_err());
    }

    #[test]
    fn credibility_preview_matches_weighted_sum() {
        let p = credibility_preview(3, "linear_decay", &[0.9, 0.5, -0.2]).unwrap();
        let want: f64 = p.weights.iter().zip([0.9, 0.5, -0.2]).map(|(w, c)| w * c).sum();
        assert!((p.score - want).abs() < 1e-12);
        let short = credibility_preview(3, "uniform", &[0.4]).unwrap();
        assert!((short.score - 0.4).abs() < 1e-12);
        assert!(credibility_preview(2, "uniform", &[0.1, 0.2, 0.3]).is_err());
    }

    #[test]
    fn wam_extremes() {
        let bm25_only = wam_point(1.0).unwrap();
        assert_eq!(bm25_only.ndcg10, bm25_only.bm25_ndcg10);
        assert_eq!(bm25_only.top.len(), 10);
        assert!(wam_point(0.5).unwrap().ndcg10 > bm25_only.ndcg10);
        assert!(wam_point(1.5).is_err());
    }

    #[test]
    fn pinned_values_match_the_wasm_build() {
        // the same numbers are printed by the browser build
        let p = wam_point(0.5).unwrap();
        assert_eq!(
            format!("{:.6} {:.6}", p.bm25_ndcg10, p.rel_stat_ndcg10),
            "0.297550 0.384295"
        );
    }
}
