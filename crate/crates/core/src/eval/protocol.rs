use std::collections::BTreeMap;
use std::io::Write;

use rand::seq::index::sample;
use rand::Rng;
use serde::Serialize;
use serde_json::{json, Map, Value};

use super::{build_queries, metrics, score_candidates, rank_of_target, EvalReport, Scorer, TargetSelection};
use crate::error::{Error, Result};
use crate::model::{Hyperparameters, NoiseKind, Window};
use crate::ome::{NoiseTable, OnlineTrainer, TrainReport};
use crate::seeds;
use crate::stats::CooccurrenceIndex;

#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolConfig {
    pub hp: Hyperparameters,
    /// Negatives per query (`M`).
    pub negatives: usize,
    pub ks: Vec<usize>,
    pub scorers: Vec<Scorer>,
    pub targets: TargetSelection,
    /// Distribution negatives are drawn from.
    pub negative_sampling: NoiseKind,
}

impl ProtocolConfig {
    pub fn new(hp: Hyperparameters) -> Self {
        ProtocolConfig {
            hp,
            negatives: super::DEFAULT_NEGATIVES,
            ks: vec![1, 5, 10],
            scorers: Scorer::ALL.to_vec(),
            targets: TargetSelection::All,
            negative_sampling: NoiseKind::Unigram,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QueryRank {
    pub window: usize,
    pub basket_id: String,
    pub target: String,
    pub scorer: Scorer,
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolOutput {
    pub reports: BTreeMap<Scorer, EvalReport>,
    pub ranks: Vec<QueryRank>,
    pub train_reports: Vec<TrainReport>,
}

/// Picks `count` windows from the second half of `0..windows`, sorted.
pub fn select_query_windows<R: Rng + ?Sized>(windows: usize, count: usize, rng: &mut R) -> Vec<usize> {
    let start = windows / 2;
    let pool = windows - start;
    let mut picked: Vec<usize> = sample(rng, pool, count.min(pool))
        .into_iter()
        .map(|i| start + i)
        .collect();
    picked.sort_unstable();
    picked
}

/// Streams the windows through the trainer and the count index, evaluating
/// each query window before it is trained on.
///
/// When a query window is reached, the model and index have consumed exactly
/// the preceding windows. Negatives are drawn from product frequencies over
/// every window up to and including the query window. Training stops after
/// the last query window.
pub fn run_protocol(
    windows: &[Window],
    query_windows: &[usize],
    config: &ProtocolConfig,
) -> Result<ProtocolOutput> {
    if let Some(&bad) = query_windows.iter().find(|&&q| q >= windows.len()) {
        return Err(Error::QueryWindowOutOfRange {
            index: bad,
            windows: windows.len(),
        });
    }
    if query_windows.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument(
            "query windows must be strictly ascending".into(),
        ));
    }
    if config.scorers.is_empty() {
        return Err(Error::InvalidArgument("at least one scorer is required".into()));
    }
    let mut trainer = OnlineTrainer::new(config.hp.clone());
    let mut store = trainer.new_store();
    let mut index = CooccurrenceIndex::new();
    let mut catalog: NoiseTable<String> = NoiseTable::new(config.negative_sampling);
    let mut rng = seeds::rng(config.hp.seed, seeds::EVAL);

    let mut ranks: Vec<QueryRank> = Vec::new();
    let mut train_reports = Vec::new();
    let last = query_windows.last().copied();
    let mut next_query = query_windows.iter().peekable();
    for window in windows {
        if last.is_some_and(|l| window.index > l) {
            break;
        }
        for b in &window.baskets {
            for p in b.products() {
                catalog.observe(&p.to_string());
            }
        }
        catalog.seal();
        if next_query.peek() == Some(&&window.index) {
            next_query.next();
            let qs = build_queries(
                &window.baskets,
                config.negatives,
                &catalog,
                config.targets,
                &mut rng,
            )?;
            for q in &qs.queries {
                for &scorer in &config.scorers {
                    let scores = score_candidates(q, &store, &index, scorer);
                    ranks.push(QueryRank {
                        window: window.index,
                        basket_id: q.basket_id.clone(),
                        target: q.target.clone(),
                        scorer,
                        rank: rank_of_target(&q.candidates, &scores, &q.target),
                    });
                }
            }
        }
        train_reports.push(trainer.train_window(window, &mut store));
        index.add_window(window);
    }

    let mut reports = BTreeMap::new();
    for &scorer in &config.scorers {
        let r: Vec<usize> = ranks
            .iter()
            .filter(|q| q.scorer == scorer)
            .map(|q| q.rank)
            .collect();
        if r.is_empty() {
            return Err(Error::InsufficientData(
                "query windows produced no queries".into(),
            ));
        }
        reports.insert(scorer, metrics(&r, &config.ks)?);
    }
    Ok(ProtocolOutput {
        reports,
        ranks,
        train_reports,
    })
}

/// `{scorer: {mrr, recall: {"k": …}, dcg, queries}}`.
pub fn report_json(reports: &BTreeMap<Scorer, EvalReport>) -> Value {
    let mut root = Map::new();
    for (scorer, r) in reports {
        let recall: Map<String, Value> = r
            .recall_at
            .iter()
            .map(|(k, v)| (k.to_string(), json!(v)))
            .collect();
        root.insert(
            scorer.name().to_string(),
            json!({
                "mrr": r.mrr,
                "recall": recall,
                "dcg": r.dcg,
                "queries": r.query_count,
            }),
        );
    }
    Value::Object(root)
}

pub fn write_ranks_csv<W: Write>(ranks: &[QueryRank], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["window", "basket_id", "target", "scorer", "rank"])?;
    for r in ranks {
        w.write_record([
            r.window.to_string().as_str(),
            &r.basket_id,
            &r.target,
            r.scorer.name(),
            &r.rank.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<ranks>", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Basket, SECONDS_PER_DAY};
    use crate::ingest::window_stream;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tiny_stream() -> Vec<Window> {
        let mut baskets = Vec::new();
        for day in 0..4 {
            for k in 0..6 {
                let a = format!("p{}", (day + k) % 12);
                let b = format!("p{}", (day * 3 + k + 5) % 12);
                baskets.push(
                    Basket::new(format!("d{day}b{k}"), day as f64 * SECONDS_PER_DAY + k as f64, format!("u{}", k % 3))
                        .with_items([(a, 1.0), (b, 2.0)]),
                );
            }
        }
        window_stream(&baskets, 1).unwrap()
    }

    fn config() -> ProtocolConfig {
        let mut c = ProtocolConfig::new(Hyperparameters {
            dim: 8,
            epochs: 2,
            seed: 5,
            ..Hyperparameters::default()
        });
        c.negatives = 3;
        c.ks = vec![1, 2, 4];
        c
    }

    #[test]
    fn query_window_zero_is_well_formed() {
        let out = run_protocol(&tiny_stream(), &[0], &config()).unwrap();
        for r in out.reports.values() {
            assert!(r.query_count > 0);
            assert_eq!(r.recall_at[&4], 1.0);
        }
        assert_eq!(out.train_reports.len(), 1);
    }

    #[test]
    fn deterministic_reports() {
        let a = run_protocol(&tiny_stream(), &[2, 3], &config()).unwrap();
        let b = run_protocol(&tiny_stream(), &[2, 3], &config()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn out_of_range_query_window() {
        assert!(matches!(
            run_protocol(&tiny_stream(), &[9], &config()),
            Err(Error::QueryWindowOutOfRange { index: 9, windows: 4 })
        ));
    }

    #[test]
    fn query_windows_from_second_half() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let picked = select_query_windows(40, 20, &mut rng);
        assert_eq!(picked.len(), 20);
        assert!(picked.iter().all(|&w| (20..40).contains(&w)));
        assert!(picked.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn json_shape() {
        let out = run_protocol(&tiny_stream(), &[3], &config()).unwrap();
        let v = report_json(&out.reports);
        assert!(v["embedding"]["recall"]["1"].is_number());
        assert!(v["pop"]["queries"].is_u64());
    }
}
