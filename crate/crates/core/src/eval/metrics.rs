use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Rank metrics averaged over queries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub mrr: f64,
    pub recall_at: BTreeMap<usize, f64>,
    pub dcg: f64,
    pub query_count: usize,
}

/// MRR, Recall@k and DCG over 1-based ranks.
///
/// Recall@k counts `rank ≤ k`, which equals `min(1, ⌊k / rank⌋)`. DCG of a
/// single relevant item at `rank` is `1 / log2(rank + 1)`.
pub fn metrics(ranks: &[usize], ks: &[usize]) -> Result<EvalReport> {
    if ranks.is_empty() {
        return Err(Error::InvalidArgument("metrics need at least one rank".into()));
    }
    if ranks.contains(&0) {
        return Err(Error::InvalidArgument("ranks are 1-based".into()));
    }
    let n = ranks.len() as f64;
    let mrr = ranks.iter().map(|&r| 1.0 / r as f64).sum::<f64>() / n;
    let dcg = ranks
        .iter()
        .map(|&r| 1.0 / ((r + 1) as f64).log2())
        .sum::<f64>()
        / n;
    let recall_at = ks
        .iter()
        .map(|&k| {
            let hits = ranks.iter().filter(|&&r| r <= k).count();
            (k, hits as f64 / n)
        })
        .collect();
    Ok(EvalReport {
        mrr,
        recall_at,
        dcg,
        query_count: ranks.len(),
    })
}
