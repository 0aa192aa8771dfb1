use std::collections::HashMap;
use std::hash::Hash;

use rand::Rng;

use crate::error::{Error, Result};
use crate::model::{NoiseKind, UnitIndex, UnitKind};

/// Draws that hit an excluded key are retried this many times before the
/// last draw is accepted.
pub const MAX_RESAMPLE_ATTEMPTS: usize = 100;

/// Frequency table with a cumulative array for `O(log n)` sampling.
///
/// Counts are added with [`observe`](Self::observe); [`seal`](Self::seal)
/// rebuilds the cumulative array. Sampling uses the last sealed state.
#[derive(Debug, Clone)]
pub struct NoiseTable<K> {
    kind: NoiseKind,
    keys: Vec<K>,
    slots: HashMap<K, usize>,
    counts: Vec<u64>,
    cumulative: Vec<u64>,
}

impl<K: Clone + Eq + Hash> NoiseTable<K> {
    pub fn new(kind: NoiseKind) -> Self {
        NoiseTable {
            kind,
            keys: Vec::new(),
            slots: HashMap::new(),
            counts: Vec::new(),
            cumulative: Vec::new(),
        }
    }

    pub fn observe(&mut self, key: &K) {
        self.observe_n(key, 1);
    }

    pub fn observe_n(&mut self, key: &K, n: u64) {
        match self.slots.get(key) {
            Some(&i) => self.counts[i] += n,
            None => {
                self.slots.insert(key.clone(), self.keys.len());
                self.keys.push(key.clone());
                self.counts.push(n);
            }
        }
    }

    pub fn seal(&mut self) {
        let mut total = 0u64;
        self.cumulative = self
            .counts
            .iter()
            .map(|&c| {
                total += match self.kind {
                    NoiseKind::Unigram => c,
                    NoiseKind::Uniform => u64::from(c > 0),
                };
                total
            })
            .collect();
    }

    /// Number of distinct keys in the sealed table.
    pub fn len(&self) -> usize {
        self.cumulative.len()
    }

    pub fn is_empty(&self) -> bool {
        self.total() == 0
    }

    pub fn total(&self) -> u64 {
        self.cumulative.last().copied().unwrap_or(0)
    }

    pub fn count(&self, key: &K) -> u64 {
        self.slots.get(key).map_or(0, |&i| self.counts[i])
    }

    pub fn keys(&self) -> &[K] {
        &self.keys[..self.cumulative.len()]
    }

    /// Probability of `key` under the sealed table.
    pub fn probability(&self, key: &K) -> f64 {
        let Some(&i) = self.slots.get(key) else {
            return 0.0;
        };
        if i >= self.cumulative.len() {
            return 0.0;
        }
        let lo = if i == 0 { 0 } else { self.cumulative[i - 1] };
        (self.cumulative[i] - lo) as f64 / self.total() as f64
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<&K> {
        let total = self.total();
        if total == 0 {
            return None;
        }
        let r = rng.random_range(0..total);
        let i = self.cumulative.partition_point(|&c| c <= r);
        Some(&self.keys[i])
    }

    /// `count` i.i.d. draws, redrawing any draw equal to `exclude` up to
    /// [`MAX_RESAMPLE_ATTEMPTS`] times.
    pub fn sample<R: Rng + ?Sized>(
        &self,
        count: usize,
        exclude: Option<&K>,
        rng: &mut R,
    ) -> Option<Vec<K>> {
        if self.is_empty() {
            return None;
        }
        let mut out = Vec::with_capacity(count);
        for _ in 0..count {
            let mut pick = self.draw(rng)?;
            for _ in 0..MAX_RESAMPLE_ATTEMPTS {
                if Some(pick) != exclude {
                    break;
                }
                pick = self.draw(rng)?;
            }
            out.push(pick.clone());
        }
        Some(out)
    }

    /// `count` distinct keys not rejected by `excluded`, drawn in proportion
    /// to the table weights. Returns `None` when fewer than `count` eligible
    /// keys exist.
    pub fn sample_distinct<R, F>(&self, count: usize, excluded: F, rng: &mut R) -> Option<Vec<K>>
    where
        R: Rng + ?Sized,
        F: Fn(&K) -> bool,
    {
        let eligible = self.keys().iter().filter(|k| !excluded(k)).count();
        if eligible < count {
            return None;
        }
        let mut out: Vec<K> = Vec::with_capacity(count);
        let mut attempts = 0usize;
        while out.len() < count && attempts < 50 * count.max(1) + MAX_RESAMPLE_ATTEMPTS {
            attempts += 1;
            let k = self.draw(rng)?;
            if !excluded(k) && !out.contains(k) {
                out.push(k.clone());
            }
        }
        if out.len() < count {
            // Heavily skewed tables: fall back to weighted draws over what is
            // left.
            let mut rest: Vec<(K, u64)> = self
                .keys()
                .iter()
                .enumerate()
                .filter(|(_, k)| !excluded(k) && !out.contains(k))
                .map(|(i, k)| {
                    let lo = if i == 0 { 0 } else { self.cumulative[i - 1] };
                    (k.clone(), (self.cumulative[i] - lo).max(1))
                })
                .collect();
            while out.len() < count {
                let total: u64 = rest.iter().map(|(_, w)| w).sum();
                let mut r = rng.random_range(0..total);
                let pos = rest
                    .iter()
                    .position(|(_, w)| {
                        if r < *w {
                            true
                        } else {
                            r -= w;
                            false
                        }
                    })
                    .expect("r < total");
                out.push(rest.swap_remove(pos).0);
            }
        }
        Some(out)
    }
}

/// Per-kind negative-sampling distributions over store indices.
#[derive(Debug, Clone)]
pub struct NoiseDistribution {
    products: NoiseTable<UnitIndex>,
    users: NoiseTable<UnitIndex>,
}

impl NoiseDistribution {
    pub fn new(kind: NoiseKind) -> Self {
        NoiseDistribution {
            products: NoiseTable::new(kind),
            users: NoiseTable::new(kind),
        }
    }

    pub fn table(&self, kind: UnitKind) -> &NoiseTable<UnitIndex> {
        match kind {
            UnitKind::Product => &self.products,
            UnitKind::User => &self.users,
        }
    }

    pub fn observe(&mut self, kind: UnitKind, unit: UnitIndex) {
        match kind {
            UnitKind::Product => self.products.observe(&unit),
            UnitKind::User => self.users.observe(&unit),
        }
    }

    pub fn seal(&mut self) {
        self.products.seal();
        self.users.seal();
    }

    /// Negative units of `kind`, avoiding `target`.
    pub fn sample_negatives<R: Rng + ?Sized>(
        &self,
        kind: UnitKind,
        count: usize,
        target: UnitIndex,
        rng: &mut R,
    ) -> Result<Vec<UnitIndex>> {
        if count == 0 {
            return Err(Error::InvalidArgument("negative count must be ≥ 1".into()));
        }
        self.table(kind)
            .sample(count, Some(&target), rng)
            .ok_or(Error::EmptyNoise(kind.name()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn single_unit_table() {
        let mut noise = NoiseDistribution::new(NoiseKind::Unigram);
        noise.observe(UnitKind::Product, 7);
        noise.seal();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let s = noise.sample_negatives(UnitKind::Product, 5, 1, &mut rng).unwrap();
        assert_eq!(s, vec![7; 5]);
    }

    #[test]
    fn uniform_frequencies() {
        let mut t = NoiseTable::new(NoiseKind::Unigram);
        for k in 0..4usize {
            t.observe(&k);
        }
        t.seal();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut hist = [0usize; 4];
        for k in t.sample(40_000, None, &mut rng).unwrap() {
            hist[k] += 1;
        }
        for h in hist {
            assert!((h as f64 / 40_000.0 - 0.25).abs() < 0.01, "{hist:?}");
        }
    }

    #[test]
    fn target_is_excluded() {
        let mut noise = NoiseDistribution::new(NoiseKind::Unigram);
        for _ in 0..3 {
            noise.observe(UnitKind::User, 0);
        }
        noise.observe(UnitKind::User, 1);
        noise.seal();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = noise.sample_negatives(UnitKind::User, 200, 0, &mut rng).unwrap();
        assert!(s.iter().all(|&u| u == 1));
    }

    #[test]
    fn empty_table_errors() {
        let mut noise = NoiseDistribution::new(NoiseKind::Unigram);
        noise.seal();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert!(matches!(
            noise.sample_negatives(UnitKind::Product, 1, 0, &mut rng),
            Err(Error::EmptyNoise("product"))
        ));
    }

    #[test]
    fn uniform_kind_ignores_counts() {
        let mut t = NoiseTable::new(NoiseKind::Uniform);
        t.observe_n(&"a", 1000);
        t.observe(&"b");
        t.seal();
        assert_eq!(t.probability(&"a"), 0.5);
        assert_eq!(t.probability(&"b"), 0.5);
    }

    #[test]
    fn probabilities_sum_to_one() {
        let mut t = NoiseTable::new(NoiseKind::Unigram);
        for (k, n) in [(1u32, 3u64), (2, 5), (3, 1)] {
            t.observe_n(&k, n);
        }
        t.seal();
        let sum: f64 = t.keys().iter().map(|k| t.probability(k)).sum();
        assert!((sum - 1.0).abs() < 1e-12);
    }

    #[test]
    fn distinct_sampling_respects_exclusion() {
        let mut t = NoiseTable::new(NoiseKind::Unigram);
        t.observe_n(&0u32, 10_000);
        for k in 1..6u32 {
            t.observe(&k);
        }
        t.seal();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let s = t.sample_distinct(4, |k| *k == 0 || *k == 5, &mut rng).unwrap();
        let mut sorted = s.clone();
        sorted.sort();
        assert_eq!(sorted, vec![1, 2, 3, 4]);
        assert!(t.sample_distinct(5, |k| *k == 0 || *k == 5, &mut rng).is_none());
    }
}
