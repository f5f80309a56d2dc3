//! Run evaluation (NDCG@10, P@10, MRR@10, MAP) and paired significance
//! testing across systems.

mod metrics;
mod significance;

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus_io::{QrelEntry, RunEntry};
use crate::error::{Error, Result};
use crate::lexical::RankedList;

pub use metrics::{average_precision, mrr_at_k, ndcg_at_k, precision_at_k};
pub use significance::{bonferroni, paired_ttest, TTest};

pub const CUTOFF: usize = 10;
pub const ALPHA: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Ndcg10,
    P10,
    Mrr10,
    Map,
}

impl Metric {
    pub fn all() -> [Metric; 4] {
        [Metric::Ndcg10, Metric::P10, Metric::Mrr10, Metric::Map]
    }

    pub fn id(self) -> &'static str {
        match self {
            Metric::Ndcg10 => "ndcg10",
            Metric::P10 => "p10",
            Metric::Mrr10 => "mrr10",
            Metric::Map => "map",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Metric {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Metric::all()
            .into_iter()
            .find(|m| m.id() == s)
            .ok_or_else(|| Error::validation(format!("unknown metric {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricValues {
    pub ndcg10: f64,
    pub p10: f64,
    pub mrr10: f64,
    pub map: f64,
}

impl MetricValues {
    pub fn get(&self, m: Metric) -> f64 {
        match m {
            Metric::Ndcg10 => self.ndcg10,
            Metric::P10 => self.p10,
            Metric::Mrr10 => self.mrr10,
            Metric::Map => self.map,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicMetrics {
    pub topic_id: String,
    #[serde(flatten)]
    pub values: MetricValues,
}

pub fn topic_metrics<S: AsRef<str>>(topic_id: &str, ranking: &[S], relevant: &HashSet<&str>) -> TopicMetrics {
    TopicMetrics {
        topic_id: topic_id.to_string(),
        values: MetricValues {
            ndcg10: ndcg_at_k(ranking, relevant, CUTOFF),
            p10: precision_at_k(ranking, relevant, CUTOFF),
            mrr10: mrr_at_k(ranking, relevant, CUTOFF),
            map: average_precision(ranking, relevant),
        },
    }
}

/// Per-topic rows (sorted by topic id) plus their means.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub run_tag: String,
    pub topics: Vec<TopicMetrics>,
    pub mean: MetricValues,
    /// Qrels topics with no relevant document; excluded from the means.
    pub skipped_no_relevant: Vec<String>,
    /// Topics judged in the qrels but missing from the run; scored as zero.
    pub missing_from_run: Vec<String>,
    /// Run topics that have no judgments; ignored.
    pub unjudged: Vec<String>,
}

impl EvalReport {
    pub fn values(&self, metric: Metric) -> Vec<(&str, f64)> {
        self.topics
            .iter()
            .map(|t| (t.topic_id.as_str(), t.values.get(metric)))
            .collect()
    }
}

pub fn evaluate_run(run: &[RunEntry], qrels: &[QrelEntry]) -> Result<EvalReport> {
    let lists = RankedList::from_run(run);
    let tag = run.first().map(|e| e.tag.clone()).unwrap_or_default();
    evaluate_lists(&tag, &lists, qrels)
}

pub fn evaluate_lists(tag: &str, lists: &[RankedList], qrels: &[QrelEntry]) -> Result<EvalReport> {
    let mut judged: BTreeMap<&str, HashSet<&str>> = BTreeMap::new();
    for q in qrels {
        let rel = judged.entry(q.topic_id.as_str()).or_default();
        if q.label == 1 {
            rel.insert(q.doc_id.as_str());
        }
    }
    let rankings: HashMap<&str, Vec<&str>> = lists.iter().map(|l| (l.topic_id.as_str(), l.doc_ids())).collect();
    if !rankings.keys().any(|t| judged.contains_key(t)) {
        return Err(Error::validation("run and qrels have no topic in common"));
    }

    let mut topics = Vec::new();
    let mut skipped = Vec::new();
    let mut missing = Vec::new();
    for (topic, relevant) in &judged {
        if relevant.is_empty() {
            skipped.push(topic.to_string());
            continue;
        }
        let ranking = match rankings.get(topic) {
            Some(r) => r.as_slice(),
            None => {
                missing.push(topic.to_string());
                &[]
            }
        };
        topics.push(topic_metrics(topic, ranking, relevant));
    }
    let unjudged: BTreeSet<String> = rankings
        .keys()
        .filter(|t| !judged.contains_key(*t))
        .map(|t| t.to_string())
        .collect();

    let n = topics.len() as f64;
    let mut mean = MetricValues::default();
    if !topics.is_empty() {
        for t in &topics {
            mean.ndcg10 += t.values.ndcg10;
            mean.p10 += t.values.p10;
            mean.mrr10 += t.values.mrr10;
            mean.map += t.values.map;
        }
        mean.ndcg10 /= n;
        mean.p10 /= n;
        mean.mrr10 /= n;
        mean.map /= n;
    }
    Ok(EvalReport {
        run_tag: tag.to_string(),
        topics,
        mean,
        skipped_no_relevant: skipped,
        missing_from_run: missing,
        unjudged: unjudged.into_iter().collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignificanceResult {
    pub system_a: String,
    pub system_b: String,
    pub metric: Metric,
    pub mean_a: f64,
    pub mean_b: f64,
    pub t_statistic: f64,
    pub p_raw: f64,
    pub p_corrected: f64,
    pub n_comparisons: usize,
    pub significant_at_0_05: bool,
    pub degenerate: bool,
}

/// All pairwise paired t-tests between reports, for each metric, with
/// Bonferroni correction over `pairs × metrics` comparisons.
pub fn compare_reports(reports: &[EvalReport], metrics: &[Metric]) -> Result<Vec<SignificanceResult>> {
    if reports.len() < 2 {
        return Err(Error::validation("comparison needs at least two runs"));
    }
    if metrics.is_empty() {
        return Err(Error::validation("comparison needs at least one metric"));
    }
    let topic_set = |r: &EvalReport| -> Vec<String> { r.topics.iter().map(|t| t.topic_id.clone()).collect() };
    let reference = topic_set(&reports[0]);
    for r in &reports[1..] {
        if topic_set(r) != reference {
            return Err(Error::validation(format!(
                "runs \"{}\" and \"{}\" were evaluated on different topic sets",
                reports[0].run_tag, r.run_tag
            )));
        }
    }
    let pairs = reports.len() * (reports.len() - 1) / 2;
    let n_comparisons = pairs * metrics.len();
    let mut out = Vec::with_capacity(n_comparisons);
    for i in 0..reports.len() {
        for j in i + 1..reports.len() {
            let (a, b) = (&reports[i], &reports[j]);
            for &m in metrics {
                let va: Vec<f64> = a.topics.iter().map(|t| t.values.get(m)).collect();
                let vb: Vec<f64> = b.topics.iter().map(|t| t.values.get(m)).collect();
                let test = paired_ttest(&va, &vb)?;
                let p_corrected = bonferroni(test.p, n_comparisons)?;
                out.push(SignificanceResult {
                    system_a: a.run_tag.clone(),
                    system_b: b.run_tag.clone(),
                    metric: m,
                    mean_a: a.mean.get(m),
                    mean_b: b.mean.get(m),
                    t_statistic: test.t,
                    p_raw: test.p,
                    p_corrected,
                    n_comparisons,
                    significant_at_0_05: p_corrected < ALPHA,
                    degenerate: test.degenerate,
                });
            }
        }
    }
    Ok(out)
}
