//! Intra-basket item retrieval: hold out one product of a basket, mix it with
//! `M` sampled negatives and rank the candidates given the rest of the basket.

mod metrics;
mod protocol;
mod repetition;

pub use metrics::{metrics, EvalReport};
pub use protocol::{
    report_json, run_protocol, select_query_windows, write_ranks_csv, ProtocolConfig,
    ProtocolOutput, QueryRank,
};
pub use repetition::{user_repetition_test, welch_one_sided, RepetitionResult, WelchTest};

use std::collections::HashSet;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{cosine, Basket, EmbeddingStore, UnitId};
use crate::ome::NoiseTable;
use crate::stats::{baseline_score, Baseline, CooccurrenceIndex};

/// Number of negatives per query.
pub const DEFAULT_NEGATIVES: usize = 10;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvalQuery {
    pub basket_id: String,
    pub target: String,
    pub context_products: Vec<String>,
    pub user: String,
    /// Target first, then the negatives.
    pub candidates: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scorer {
    Embedding,
    Pop,
    Sup,
    Lift,
}

impl Scorer {
    pub const ALL: [Scorer; 4] = [Scorer::Embedding, Scorer::Pop, Scorer::Sup, Scorer::Lift];

    pub fn name(self) -> &'static str {
        match self {
            Scorer::Embedding => "embedding",
            Scorer::Pop => "pop",
            Scorer::Sup => "sup",
            Scorer::Lift => "lift",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|x| x.name() == s)
    }
}

/// Which products of a test basket become targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TargetSelection {
    /// One query per product in the basket.
    All,
    /// One randomly chosen target per basket.
    Single,
}

#[derive(Debug, Clone, Default)]
pub struct QuerySet {
    pub queries: Vec<EvalQuery>,
    /// Ids of baskets with fewer than two products.
    pub skipped: Vec<String>,
}

/// Builds queries for every basket with at least two products. Negatives are
/// distinct and never one of the basket's own products.
pub fn build_queries<R: Rng + ?Sized>(
    baskets: &[Basket],
    negatives: usize,
    source: &NoiseTable<String>,
    targets: TargetSelection,
    rng: &mut R,
) -> Result<QuerySet> {
    let mut out = QuerySet::default();
    for b in baskets {
        if b.items.len() < 2 {
            log::debug!("basket {} has {} product(s); no query", b.id, b.items.len());
            out.skipped.push(b.id.clone());
            continue;
        }
        let own: HashSet<&str> = b.products().collect();
        let picks: Vec<usize> = match targets {
            TargetSelection::All => (0..b.items.len()).collect(),
            TargetSelection::Single => vec![rng.random_range(0..b.items.len())],
        };
        for t in picks {
            let target = &b.items[t].product;
            let negs = source
                .sample_distinct(negatives, |p| own.contains(p.as_str()), rng)
                .ok_or(Error::CatalogTooSmall {
                    catalog: source.len(),
                    needed: negatives + b.items.len(),
                })?;
            let context_products = b
                .products()
                .filter(|p| p != target)
                .map(str::to_string)
                .collect();
            let mut candidates = Vec::with_capacity(negatives + 1);
            candidates.push(target.clone());
            candidates.extend(negs);
            out.queries.push(EvalQuery {
                basket_id: b.id.clone(),
                target: target.clone(),
                context_products,
                user: b.user.clone(),
                candidates,
            });
        }
    }
    Ok(out)
}

/// Candidate scores under `scorer`; higher is better.
pub fn score_candidates(
    query: &EvalQuery,
    store: &EmbeddingStore,
    index: &CooccurrenceIndex,
    scorer: Scorer,
) -> Vec<f64> {
    match scorer {
        Scorer::Embedding => {
            let context: Vec<Option<&[f64]>> = query
                .context_products
                .iter()
                .map(|p| store.vector_of(&UnitId::product(p.clone())))
                .chain(std::iter::once(store.vector_of(&UnitId::user(query.user.clone()))))
                .collect();
            query
                .candidates
                .iter()
                .map(|c| {
                    let Some(vc) = store.vector_of(&UnitId::product(c.clone())) else {
                        return 0.0;
                    };
                    let total: f64 = context
                        .iter()
                        .map(|u| u.map_or(0.0, |vu| cosine(vc, vu)))
                        .sum();
                    total / context.len() as f64
                })
                .collect()
        }
        other => {
            let method = match other {
                Scorer::Pop => Baseline::Pop,
                Scorer::Sup => Baseline::Sup,
                _ => Baseline::Lift,
            };
            let context: Vec<&str> = query.context_products.iter().map(String::as_str).collect();
            query
                .candidates
                .iter()
                .map(|c| baseline_score(c, &context, index, method))
                .collect()
        }
    }
}

/// 1-based rank of the target: candidates ordered by score descending, ties
/// by product id ascending.
pub fn rank_of_target(candidates: &[String], scores: &[f64], target: &str) -> usize {
    let pos = candidates
        .iter()
        .position(|c| c == target)
        .expect("target is a candidate");
    let ts = scores[pos];
    1 + candidates
        .iter()
        .zip(scores)
        .filter(|(c, s)| {
            c.as_str() != target && (**s > ts || (**s == ts && c.as_str() < target))
        })
        .count()
}

pub fn rank_candidates(
    query: &EvalQuery,
    store: &EmbeddingStore,
    index: &CooccurrenceIndex,
    scorer: Scorer,
) -> usize {
    let scores = score_candidates(query, store, index, scorer);
    rank_of_target(&query.candidates, &scores, &query.target)
}
