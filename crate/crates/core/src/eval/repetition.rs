//! Do users rebuy the same products? Compares TF-IDF cosine similarity of
//! basket pairs from the same user against pairs from different users with a
//! one-sided Welch t-test.

use std::collections::HashMap;

use rand::Rng;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::model::Basket;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WelchTest {
    pub t_stat: f64,
    pub df: f64,
    /// One-sided p-value for `H0: mean(a) ≤ mean(b)`.
    pub p_value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RepetitionResult {
    pub t_stat: f64,
    pub p_value: f64,
    pub df: f64,
    pub mean_same: f64,
    pub mean_diff: f64,
    pub pairs: usize,
}

fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

/// One-sided Welch test of `mean(a) > mean(b)`, degrees of freedom by
/// Welch–Satterthwaite.
pub fn welch_one_sided(a: &[f64], b: &[f64]) -> Result<WelchTest> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::InsufficientData("Welch test needs ≥ 2 samples per group".into()));
    }
    let (ma, va) = mean_var(a);
    let (mb, vb) = mean_var(b);
    let (sa, sb) = (va / a.len() as f64, vb / b.len() as f64);
    let se2 = sa + sb;
    if se2 == 0.0 {
        // Both samples constant: the ordering of the means is certain.
        let (t_stat, p_value) = match ma.partial_cmp(&mb) {
            Some(std::cmp::Ordering::Greater) => (f64::INFINITY, 0.0),
            Some(std::cmp::Ordering::Less) => (f64::NEG_INFINITY, 1.0),
            _ => (0.0, 1.0),
        };
        return Ok(WelchTest {
            t_stat,
            df: (a.len() + b.len() - 2) as f64,
            p_value,
        });
    }
    let t_stat = (ma - mb) / se2.sqrt();
    let df = se2 * se2
        / (sa * sa / (a.len() - 1) as f64 + sb * sb / (b.len() - 1) as f64);
    let dist = StudentsT::new(0.0, 1.0, df)
        .map_err(|e| Error::InvalidArgument(format!("t distribution: {e}")))?;
    // Upper tail via symmetry keeps precision for large t.
    let p_value = dist.cdf(-t_stat);
    Ok(WelchTest { t_stat, df, p_value })
}

/// Baskets as sparse TF-IDF vectors (baskets are documents, products are
/// words; term frequency is 1 since baskets are sets).
struct TfIdf {
    /// Sorted `(product, weight)` per basket.
    vectors: Vec<Vec<(u32, f64)>>,
    norms: Vec<f64>,
}

impl TfIdf {
    fn new(baskets: &[Basket]) -> Self {
        let mut ids: HashMap<&str, u32> = HashMap::new();
        let mut df: Vec<u64> = Vec::new();
        let mut docs: Vec<Vec<u32>> = Vec::with_capacity(baskets.len());
        for b in baskets {
            let mut doc: Vec<u32> = b
                .products()
                .map(|p| {
                    let next = ids.len() as u32;
                    let id = *ids.entry(p).or_insert(next);
                    if id as usize == df.len() {
                        df.push(0);
                    }
                    id
                })
                .collect();
            doc.sort_unstable();
            doc.dedup();
            for &p in &doc {
                df[p as usize] += 1;
            }
            docs.push(doc);
        }
        let n = baskets.len() as f64;
        let idf: Vec<f64> = df.iter().map(|&d| (n / d as f64).ln()).collect();
        let vectors: Vec<Vec<(u32, f64)>> = docs
            .into_iter()
            .map(|doc| doc.into_iter().map(|p| (p, idf[p as usize])).collect())
            .collect();
        let norms = vectors
            .iter()
            .map(|v| v.iter().map(|(_, w)| w * w).sum::<f64>().sqrt())
            .collect();
        TfIdf { vectors, norms }
    }

    fn cosine(&self, a: usize, b: usize) -> f64 {
        let (na, nb) = (self.norms[a], self.norms[b]);
        if na == 0.0 || nb == 0.0 {
            return 0.0;
        }
        let (va, vb) = (&self.vectors[a], &self.vectors[b]);
        let (mut i, mut j, mut acc) = (0, 0, 0.0);
        while i < va.len() && j < vb.len() {
            match va[i].0.cmp(&vb[j].0) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    acc += va[i].1 * vb[j].1;
                    i += 1;
                    j += 1;
                }
            }
        }
        acc / (na * nb)
    }
}

/// Samples `pairs` same-user and `pairs` different-user basket pairs and
/// tests whether same-user baskets are more similar.
///
/// Same-user pairs pick a user uniformly among users with two or more baskets,
/// then two distinct baskets of that user. Different-user pairs pick two
/// baskets uniformly until their users differ.
pub fn user_repetition_test<R: Rng + ?Sized>(
    baskets: &[Basket],
    pairs: usize,
    rng: &mut R,
) -> Result<RepetitionResult> {
    let mut by_user: HashMap<&str, Vec<usize>> = HashMap::new();
    for (i, b) in baskets.iter().enumerate() {
        by_user.entry(b.user.as_str()).or_default().push(i);
    }
    let mut eligible: Vec<(&str, Vec<usize>)> = by_user
        .iter()
        .filter(|(_, v)| v.len() >= 2)
        .map(|(u, v)| (*u, v.clone()))
        .collect();
    eligible.sort_unstable_by(|a, b| a.0.cmp(b.0));
    if eligible.len() < 2 {
        return Err(Error::InsufficientData(
            "need at least 2 users with 2 or more baskets".into(),
        ));
    }
    if pairs < 2 {
        return Err(Error::InvalidArgument("need at least 2 sample pairs".into()));
    }
    let tfidf = TfIdf::new(baskets);

    let same: Vec<f64> = (0..pairs)
        .map(|_| {
            let (_, own) = &eligible[rng.random_range(0..eligible.len())];
            let a = rng.random_range(0..own.len());
            let mut b = rng.random_range(0..own.len() - 1);
            if b >= a {
                b += 1;
            }
            tfidf.cosine(own[a], own[b])
        })
        .collect();
    let diff: Vec<f64> = (0..pairs)
        .map(|_| loop {
            let a = rng.random_range(0..baskets.len());
            let b = rng.random_range(0..baskets.len());
            if baskets[a].user != baskets[b].user {
                break tfidf.cosine(a, b);
            }
        })
        .collect();

    let test = welch_one_sided(&same, &diff)?;
    Ok(RepetitionResult {
        t_stat: test.t_stat,
        p_value: test.p_value,
        df: test.df,
        mean_same: same.iter().sum::<f64>() / pairs as f64,
        mean_diff: diff.iter().sum::<f64>() / pairs as f64,
        pairs,
    })
}
