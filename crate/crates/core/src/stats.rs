//! Exact basket counts: support, lift and the count-based retrieval
//! baselines.

use std::collections::{BTreeMap, HashMap};
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Basket, Window};

/// Sparse item and pair counts over a set of baskets.
///
/// Pairs are keyed by the ordered pair of interned product indices.
#[derive(Debug, Clone, Default)]
pub struct CooccurrenceIndex {
    basket_count: u64,
    names: Vec<String>,
    lookup: HashMap<String, u32>,
    item_counts: Vec<u64>,
    pair_counts: HashMap<(u32, u32), u64>,
}

impl CooccurrenceIndex {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn build<'a>(baskets: impl IntoIterator<Item = &'a Basket>) -> Self {
        let mut index = Self::new();
        for b in baskets {
            index.add_basket(b);
        }
        index
    }

    fn intern(&mut self, product: &str) -> u32 {
        if let Some(&i) = self.lookup.get(product) {
            return i;
        }
        let i = self.names.len() as u32;
        self.names.push(product.to_string());
        self.lookup.insert(product.to_string(), i);
        self.item_counts.push(0);
        i
    }

    pub fn add_basket(&mut self, basket: &Basket) {
        self.basket_count += 1;
        let ids: Vec<u32> = basket.products().map(|p| self.intern(p)).collect();
        for (k, &a) in ids.iter().enumerate() {
            self.item_counts[a as usize] += 1;
            for &b in &ids[k + 1..] {
                *self.pair_counts.entry(ordered(a, b)).or_insert(0) += 1;
            }
        }
    }

    /// Incremental update; adding windows one by one equals building over
    /// their concatenation.
    pub fn add_window(&mut self, window: &Window) {
        for b in &window.baskets {
            self.add_basket(b);
        }
    }

    pub fn basket_count(&self) -> u64 {
        self.basket_count
    }

    pub fn product_count(&self) -> usize {
        self.names.len()
    }

    pub fn products(&self) -> &[String] {
        &self.names
    }

    pub fn item_count(&self, product: &str) -> u64 {
        self.lookup
            .get(product)
            .map_or(0, |&i| self.item_counts[i as usize])
    }

    pub fn pair_count(&self, x: &str, y: &str) -> u64 {
        match (self.lookup.get(x), self.lookup.get(y)) {
            (Some(&a), Some(&b)) if a != b => {
                self.pair_counts.get(&ordered(a, b)).copied().unwrap_or(0)
            }
            (Some(_), Some(_)) => self.item_count(x),
            _ => 0,
        }
    }

    /// Fraction of baskets containing every product of `itemset` (size 1 or
    /// 2).
    pub fn support(&self, itemset: &[&str]) -> Result<f64> {
        if self.basket_count == 0 {
            return Err(Error::EmptyIndex);
        }
        let count = match itemset {
            [x] => self.item_count(x),
            [x, y] => self.pair_count(x, y),
            other => return Err(Error::ItemsetSize(other.len())),
        };
        Ok(count as f64 / self.basket_count as f64)
    }

    /// `support(x,y) / (support(x) * support(y))`. Zero marginal support is
    /// an error, distinct from a lift of 0 for products never bought
    /// together.
    pub fn lift(&self, x: &str, y: &str) -> Result<f64> {
        let (cx, cy) = (self.item_count(x), self.item_count(y));
        if self.basket_count == 0 || cx == 0 || cy == 0 {
            return Err(Error::UndefinedLift(x.to_string(), y.to_string()));
        }
        let n = self.basket_count as f64;
        // Counts form: n * c_xy / (c_x * c_y), symmetric by construction.
        Ok(n * self.pair_count(x, y) as f64 / (cx as f64 * cy as f64))
    }

    /// Sorted `(a, b, count)` triples with `a < b`.
    pub fn pair_entries(&self) -> Vec<(&str, &str, u64)> {
        let mut out: Vec<_> = self
            .pair_counts
            .iter()
            .map(|(&(a, b), &c)| {
                let (x, y) = (self.names[a as usize].as_str(), self.names[b as usize].as_str());
                if x <= y { (x, y, c) } else { (y, x, c) }
            })
            .collect();
        out.sort_unstable();
        out
    }

    /// Debug dump: `product_a,product_b,pair_count`.
    pub fn write_pairs_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["product_a", "product_b", "pair_count"])?;
        for (a, b, c) in self.pair_entries() {
            w.write_record([a, b, &c.to_string()])?;
        }
        w.flush().map_err(|e| Error::io("<pair dump>", e))?;
        Ok(())
    }
}

impl PartialEq for CooccurrenceIndex {
    /// Semantic equality: same counts under product names, regardless of
    /// interning order.
    fn eq(&self, other: &Self) -> bool {
        let items = |ix: &Self| -> BTreeMap<String, u64> {
            ix.names
                .iter()
                .cloned()
                .zip(ix.item_counts.iter().copied())
                .collect()
        };
        self.basket_count == other.basket_count
            && items(self) == items(other)
            && self.pair_entries() == other.pair_entries()
    }
}

#[inline]
fn ordered(a: u32, b: u32) -> (u32, u32) {
    if a < b { (a, b) } else { (b, a) }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Baseline {
    Pop,
    Sup,
    Lift,
}

/// Count-based candidate score; higher is better and unseen candidates score
/// 0. Sup and Lift average over the context products, with undefined lift
/// terms counted as 0.
pub fn baseline_score(
    candidate: &str,
    context: &[&str],
    index: &CooccurrenceIndex,
    method: Baseline,
) -> f64 {
    match method {
        Baseline::Pop => index.item_count(candidate) as f64,
        Baseline::Sup | Baseline::Lift if context.is_empty() => 0.0,
        Baseline::Sup => {
            let total: f64 = context
                .iter()
                .map(|c| index.support(&[candidate, c]).unwrap_or(0.0))
                .sum();
            total / context.len() as f64
        }
        Baseline::Lift => {
            let total: f64 = context
                .iter()
                .map(|c| index.lift(candidate, c).unwrap_or(0.0))
                .sum();
            total / context.len() as f64
        }
    }
}
