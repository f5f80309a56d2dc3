//! Binary-relevance ranking metrics. Unjudged documents count as
//! non-relevant.

use std::collections::HashSet;

/// NDCG with gain `rel_i` and discount `log2(i + 1)`.
pub fn ndcg_at_k<S: AsRef<str>>(ranking: &[S], relevant: &HashSet<&str>, k: usize) -> f64 {
    if relevant.is_empty() || k == 0 {
        return 0.0;
    }
    let dcg: f64 = ranking
        .iter()
        .take(k)
        .enumerate()
        .filter(|(_, d)| relevant.contains(d.as_ref()))
        .map(|(i, _)| 1.0 / ((i + 2) as f64).log2())
        .sum();
    let ideal: f64 = (0..relevant.len().min(k)).map(|i| 1.0 / ((i + 2) as f64).log2()).sum();
    dcg / ideal
}

/// Relevant documents in the top k, divided by k.
pub fn precision_at_k<S: AsRef<str>>(ranking: &[S], relevant: &HashSet<&str>, k: usize) -> f64 {
    if k == 0 {
        return 0.0;
    }
    let hits = ranking.iter().take(k).filter(|d| relevant.contains(d.as_ref())).count();
    hits as f64 / k as f64
}

pub fn mrr_at_k<S: AsRef<str>>(ranking: &[S], relevant: &HashSet<&str>, k: usize) -> f64 {
    ranking
        .iter()
        .take(k)
        .position(|d| relevant.contains(d.as_ref()))
        .map_or(0.0, |i| 1.0 / (i + 1) as f64)
}

/// Average precision over the full ranking, normalized by the total number
/// of relevant documents.
pub fn average_precision<S: AsRef<str>>(ranking: &[S], relevant: &HashSet<&str>) -> f64 {
    if relevant.is_empty() {
        return 0.0;
    }
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (i, d) in ranking.iter().enumerate() {
        if relevant.contains(d.as_ref()) {
            hits += 1;
            sum += hits as f64 / (i + 1) as f64;
        }
    }
    sum / relevant.len() as f64
}
