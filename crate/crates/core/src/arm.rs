//! Association rules from embedding proximity via sign random projections.
//!
//! Each of `|H|` tables hashes a normalized product embedding to the sign
//! pattern of its dot products with `|F|` Gaussian vectors. Products sharing
//! a bucket collide in that table; pairs that collide in the most tables are
//! returned as rules.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{dot, normalize, sigmoid, EmbeddingStore, UnitIndex};
use crate::stats::CooccurrenceIndex;

pub const DEFAULT_FUNCTIONS: usize = 4;
pub const DEFAULT_TABLES: usize = 11;
pub const DEFAULT_LIFT_SCALE: f64 = 4.3;
pub const DEFAULT_TOP_K: usize = 100;

/// `|H|` tables of `|F|` standard-normal projection vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct HashEnsemble {
    dim: usize,
    functions: usize,
    tables: usize,
    seed: u64,
    projections: Vec<f64>,
}

/// One table's hash value; bit `i` is set when `f_i · v ≥ 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Signature(pub u64);

impl Signature {
    pub fn bit(self, i: usize) -> bool {
        self.0 >> i & 1 == 1
    }
}

impl HashEnsemble {
    pub fn new(dim: usize, functions: usize, tables: usize, seed: u64) -> Result<Self> {
        if functions == 0 || functions > 64 || tables == 0 || dim == 0 {
            return Err(Error::InvalidArgument(format!(
                "ensemble needs 1 ≤ |F| ≤ 64, |H| ≥ 1, d ≥ 1 (got |F|={functions}, |H|={tables}, d={dim})"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let projections = (0..dim * functions * tables)
            .map(|_| StandardNormal.sample(&mut rng))
            .collect();
        Ok(HashEnsemble {
            dim,
            functions,
            tables,
            seed,
            projections,
        })
    }

    pub fn with_defaults(dim: usize, seed: u64) -> Self {
        Self::new(dim, DEFAULT_FUNCTIONS, DEFAULT_TABLES, seed).expect("defaults are valid")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn functions(&self) -> usize {
        self.functions
    }

    pub fn tables(&self) -> usize {
        self.tables
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn projection(&self, table: usize, function: usize) -> &[f64] {
        let start = (table * self.functions + function) * self.dim;
        &self.projections[start..start + self.dim]
    }

    /// Sign pattern of `v` in `table`. The sign test is scale invariant, so
    /// normalization does not change the bits; zero maps to 1.
    pub fn signature(&self, v: &[f64], table: usize) -> Signature {
        let mut bits = 0u64;
        for i in 0..self.functions {
            if dot(self.projection(table, i), v) >= 0.0 {
                bits |= 1 << i;
            }
        }
        Signature(bits)
    }

    pub fn signatures(&self, v: &[f64]) -> Vec<Signature> {
        (0..self.tables).map(|t| self.signature(v, t)).collect()
    }
}

/// Probability that two unit vectors at `cosine` share a bucket in at least
/// one table: `1 - (1 - (1 - acos(c)/π)^F)^H`.
pub fn collision_probability(cosine: f64, functions: usize, tables: usize) -> f64 {
    let per_function = 1.0 - cosine.clamp(-1.0, 1.0).acos() / PI;
    let per_table = per_function.powi(functions as i32);
    1.0 - (1.0 - per_table).powi(tables as i32)
}

/// Lift-based association likelihood `σ(A · cosine)`.
pub fn lift_likelihood(cosine: f64, scale: f64) -> f64 {
    sigmoid(scale * cosine)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CalibrationGap {
    pub max_gap: f64,
    pub at_cosine: f64,
}

/// Largest `|collision_probability - lift_likelihood|` over a cosine grid on
/// `[-1, 1]` with spacing `step`.
pub fn calibration_gap(functions: usize, tables: usize, scale: f64, step: f64) -> CalibrationGap {
    let n = (2.0 / step).round() as usize;
    let mut best = CalibrationGap {
        max_gap: 0.0,
        at_cosine: -1.0,
    };
    for k in 0..=n {
        let c = (-1.0 + k as f64 * step).min(1.0);
        let gap = (collision_probability(c, functions, tables) - lift_likelihood(c, scale)).abs();
        if gap > best.max_gap {
            best = CalibrationGap {
                max_gap: gap,
                at_cosine: c,
            };
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FittedScale {
    pub functions: usize,
    pub tables: usize,
    pub scale: f64,
    pub gap: f64,
}

/// Best `A` for a given `(|F|, |H|)`: coarse grid on `[0.1, 30]` followed by
/// golden-section refinement around the best grid point.
pub fn fit_scale(functions: usize, tables: usize, step: f64) -> FittedScale {
    let gap = |a: f64| calibration_gap(functions, tables, a, step).max_gap;
    let coarse = 0.1;
    let (mut best_a, mut best_g) = (0.1, f64::INFINITY);
    let mut a = 0.1;
    while a <= 30.0 {
        let g = gap(a);
        if g < best_g {
            best_a = a;
            best_g = g;
        }
        a += coarse;
    }
    let (mut lo, mut hi) = ((best_a - coarse).max(1e-3), best_a + coarse);
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..40 {
        let m1 = hi - phi * (hi - lo);
        let m2 = lo + phi * (hi - lo);
        if gap(m1) <= gap(m2) {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    let refined = (lo + hi) / 2.0;
    let refined_gap = gap(refined);
    let (scale, gap) = if refined_gap < best_g {
        (refined, refined_gap)
    } else {
        (best_a, best_g)
    };
    FittedScale {
        functions,
        tables,
        scale,
        gap,
    }
}

/// Fits `A` for every `(|F|, |H|)` in the given ranges, best first.
pub fn calibration_sweep(
    functions: std::ops::RangeInclusive<usize>,
    tables: std::ops::RangeInclusive<usize>,
    step: f64,
) -> Vec<FittedScale> {
    let grid: Vec<(usize, usize)> = functions
        .flat_map(|f| tables.clone().map(move |h| (f, h)))
        .collect();
    let mut out: Vec<FittedScale> = grid
        .par_iter()
        .map(|&(f, h)| fit_scale(f, h, step))
        .collect();
    out.sort_by(|a, b| a.gap.total_cmp(&b.gap));
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssociationRule {
    pub product_a: String,
    pub product_b: String,
    pub collision_count: u32,
    pub cosine: f64,
    /// Empirical lift; `None` when no index was given or lift is undefined.
    pub lift: Option<f64>,
}

/// Buckets larger than the limit are not enumerated for pairs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BucketGuard {
    /// `factor * sqrt(N)` products.
    SqrtN(f64),
    /// `factor * N / 2^|F|`, a multiple of the mean bucket size.
    MeanMultiple(f64),
    Fixed(usize),
    /// The larger of `sqrt_factor * sqrt(N)` and `mean_factor * N / 2^|F|`.
    Larger { sqrt_factor: f64, mean_factor: f64 },
    Off,
}

impl BucketGuard {
    /// `2·sqrt(N)` alone skips ordinary buckets whenever `N / 2^|F|` is near
    /// `2·sqrt(N)` (about a thousand products at `|F| = 4`), so the limit never
    /// drops below four times the mean bucket size.
    pub const DEFAULT: BucketGuard = BucketGuard::Larger {
        sqrt_factor: 2.0,
        mean_factor: 4.0,
    };

    pub fn limit(self, products: usize, functions: usize) -> usize {
        match self {
            BucketGuard::SqrtN(f) => (f * (products as f64).sqrt()).ceil() as usize,
            BucketGuard::MeanMultiple(f) => {
                (f * products as f64 / 2f64.powi(functions as i32)).ceil() as usize
            }
            BucketGuard::Fixed(n) => n,
            BucketGuard::Larger {
                sqrt_factor,
                mean_factor,
            } => BucketGuard::SqrtN(sqrt_factor)
                .limit(products, functions)
                .max(BucketGuard::MeanMultiple(mean_factor).limit(products, functions)),
            BucketGuard::Off => usize::MAX,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MiningOptions {
    pub top_k: usize,
    pub guard: BucketGuard,
    /// Products seen in fewer baskets are left out; 0 keeps everything.
    pub min_occurrences: u64,
}

impl Default for MiningOptions {
    fn default() -> Self {
        MiningOptions {
            top_k: DEFAULT_TOP_K,
            guard: BucketGuard::DEFAULT,
            min_occurrences: 0,
        }
    }
}

/// Products that shared one bucket.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BucketGroup {
    pub table: usize,
    pub signature: Signature,
    pub products: Vec<String>,
}

/// Colliding pairs, recorded groups and skipped buckets of one table.
type TableScan = (Vec<(u32, u32)>, Vec<BucketGroup>, usize);

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MiningOutput {
    pub rules: Vec<AssociationRule>,
    pub groups: Vec<BucketGroup>,
    pub skipped_buckets: usize,
    /// Products left out for a zero embedding or too few occurrences.
    pub excluded: Vec<String>,
    pub candidate_pairs: usize,
}

/// Mines the `top_k` most-colliding product pairs.
///
/// Ranking is collision count descending, then cosine descending, then the
/// pair ids ascending. Only pairs that share at least one bucket are ever
/// considered.
pub fn mine_rules(
    store: &EmbeddingStore,
    ensemble: &HashEnsemble,
    options: &MiningOptions,
    index: Option<&CooccurrenceIndex>,
) -> Result<MiningOutput> {
    if options.top_k < 1 {
        return Err(Error::InvalidArgument("top_k must be ≥ 1".into()));
    }
    if ensemble.dim() != store.dim() {
        return Err(Error::InvalidArgument(format!(
            "ensemble dimension {} does not match store dimension {}",
            ensemble.dim(),
            store.dim()
        )));
    }
    let mut out = MiningOutput::default();
    let mut members: Vec<UnitIndex> = Vec::new();
    let mut vectors: Vec<Vec<f64>> = Vec::new();
    for idx in store.product_indices() {
        let n = normalize(store.vector(idx));
        if n.degenerate || store.occurrences(idx) < options.min_occurrences {
            if n.degenerate {
                log::warn!("{} has a zero embedding; excluded from mining", store.unit(idx));
            }
            out.excluded.push(store.unit(idx).id.clone());
            continue;
        }
        members.push(idx);
        vectors.push(n.vector);
    }
    if members.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "mining needs at least 2 products, found {}",
            members.len()
        )));
    }
    let limit = options.guard.limit(members.len(), ensemble.functions());

    let per_table: Vec<TableScan> = (0..ensemble.tables())
        .into_par_iter()
        .map(|t| {
            let mut buckets: HashMap<Signature, Vec<u32>> = HashMap::new();
            for (k, v) in vectors.iter().enumerate() {
                buckets.entry(ensemble.signature(v, t)).or_default().push(k as u32);
            }
            let mut keys: Vec<Signature> = buckets.keys().copied().collect();
            keys.sort_unstable();
            let mut pairs = Vec::new();
            let mut groups = Vec::new();
            let mut skipped = 0;
            for sig in keys {
                let bucket = &buckets[&sig];
                if bucket.len() < 2 {
                    continue;
                }
                groups.push(BucketGroup {
                    table: t,
                    signature: sig,
                    products: bucket
                        .iter()
                        .map(|&k| store.unit(members[k as usize]).id.clone())
                        .collect(),
                });
                if bucket.len() > limit {
                    log::info!(
                        "table {t}: bucket {:0w$b} holds {} products (limit {limit}); skipped",
                        sig.0,
                        bucket.len(),
                        w = ensemble.functions()
                    );
                    skipped += 1;
                    continue;
                }
                for (i, &a) in bucket.iter().enumerate() {
                    for &b in &bucket[i + 1..] {
                        pairs.push((a, b));
                    }
                }
            }
            (pairs, groups, skipped)
        })
        .collect();

    let mut counts: HashMap<(u32, u32), u32> = HashMap::new();
    for (pairs, groups, skipped) in per_table {
        for p in pairs {
            *counts.entry(p).or_insert(0) += 1;
        }
        out.groups.extend(groups);
        out.skipped_buckets += skipped;
    }
    out.candidate_pairs = counts.len();

    let mut rules: Vec<AssociationRule> = counts
        .into_iter()
        .map(|((a, b), count)| {
            let (ia, ib) = (members[a as usize], members[b as usize]);
            let (mut pa, mut pb) = (&store.unit(ia).id, &store.unit(ib).id);
            if pb < pa {
                std::mem::swap(&mut pa, &mut pb);
            }
            AssociationRule {
                product_a: pa.clone(),
                product_b: pb.clone(),
                collision_count: count,
                cosine: dot(&vectors[a as usize], &vectors[b as usize]).clamp(-1.0, 1.0),
                lift: None,
            }
        })
        .collect();
    rules.sort_by(|x, y| {
        y.collision_count
            .cmp(&x.collision_count)
            .then_with(|| y.cosine.total_cmp(&x.cosine))
            .then_with(|| x.product_a.cmp(&y.product_a))
            .then_with(|| x.product_b.cmp(&y.product_b))
    });
    rules.truncate(options.top_k);
    if let Some(index) = index {
        for r in &mut rules {
            r.lift = index.lift(&r.product_a, &r.product_b).ok();
        }
    }
    out.rules = rules;
    Ok(out)
}

/// One JSON object per line, in rank order.
pub fn write_rules_jsonl<W: Write>(rules: &[AssociationRule], mut out: W) -> Result<()> {
    for r in rules {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n").map_err(|e| Error::io("<rules>", e))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::UnitId;

    #[test]
    fn self_projection_sets_bit() {
        let e = HashEnsemble::with_defaults(8, 3);
        let f0 = e.projection(0, 0).to_vec();
        assert!(e.signature(&f0, 0).bit(0));
    }

    #[test]
    fn negation_complements_and_scaling_preserves() {
        let e = HashEnsemble::with_defaults(8, 5);
        let v: Vec<f64> = (0..8).map(|i| (i as f64 * 0.7).sin()).collect();
        let neg: Vec<f64> = v.iter().map(|x| -x).collect();
        let scaled: Vec<f64> = v.iter().map(|x| x * 4.0).collect();
        let mask = (1u64 << e.functions()) - 1;
        for t in 0..e.tables() {
            assert_eq!(e.signature(&v, t).0 ^ mask, e.signature(&neg, t).0);
            assert_eq!(e.signature(&v, t), e.signature(&scaled, t));
        }
    }

    #[test]
    fn ensemble_is_seeded() {
        assert_eq!(HashEnsemble::with_defaults(16, 9), HashEnsemble::with_defaults(16, 9));
        assert_ne!(HashEnsemble::with_defaults(16, 9), HashEnsemble::with_defaults(16, 10));
        assert!(HashEnsemble::new(4, 0, 3, 1).is_err());
    }

    #[test]
    fn collision_probability_examples() {
        assert_eq!(collision_probability(1.0, 4, 11), 1.0);
        assert_eq!(collision_probability(-1.0, 4, 11), 0.0);
        let oracle = 1.0 - (1.0 - 0.5f64.powi(4)).powi(11);
        assert!((collision_probability(0.0, 4, 11) - oracle).abs() < 1e-12);
        assert!((collision_probability(0.0, 4, 11) - 0.50832).abs() < 1e-4);
    }

    #[test]
    fn lift_likelihood_examples() {
        assert_eq!(lift_likelihood(0.0, 4.3), 0.5);
        assert!((lift_likelihood(0.5, 4.3) - 0.89571).abs() < 1e-4);
        assert!((lift_likelihood(-0.5, 4.3) - 0.10429).abs() < 1e-4);
    }

    #[test]
    fn calibration_examples() {
        let g = calibration_gap(4, 11, 4.3, 0.001);
        assert!(g.max_gap <= 0.08, "{g:?}");
        assert!(calibration_gap(1, 1, 4.3, 0.001).max_gap > g.max_gap);
        let endpoint = (collision_probability(1.0, 4, 11) - lift_likelihood(1.0, 4.3)).abs();
        assert!((endpoint - 0.01339).abs() < 1e-4);
    }

    #[test]
    fn fitted_scale_beats_or_matches_fixed() {
        let fit = fit_scale(4, 11, 0.001);
        assert!(fit.gap <= calibration_gap(4, 11, 4.3, 0.001).max_gap);
        assert!((fit.scale - 4.3).abs() < 0.5);
    }

    fn store_of(vectors: &[(&str, Vec<f64>)]) -> EmbeddingStore {
        let mut s = EmbeddingStore::new(vectors[0].1.len());
        for (id, v) in vectors {
            s.insert(UnitId::product(*id), v);
        }
        s
    }

    #[test]
    fn identical_embeddings_collide_everywhere() {
        let store = store_of(&[
            ("a", vec![1.0, 2.0, 3.0, 4.0]),
            ("b", vec![1.0, 2.0, 3.0, 4.0]),
            ("c", vec![-1.0, 0.5, 0.0, 2.0]),
        ]);
        let e = HashEnsemble::with_defaults(4, 1);
        let out = mine_rules(&store, &e, &MiningOptions::default(), None).unwrap();
        let top = &out.rules[0];
        assert_eq!((top.product_a.as_str(), top.product_b.as_str()), ("a", "b"));
        assert_eq!(top.collision_count, 11);
    }

    #[test]
    fn antipodal_embeddings_never_collide() {
        let store = store_of(&[("a", vec![1.0, -2.0, 0.5]), ("b", vec![-1.0, 2.0, -0.5])]);
        let e = HashEnsemble::with_defaults(3, 1);
        let out = mine_rules(&store, &e, &MiningOptions::default(), None).unwrap();
        assert!(out.rules.is_empty());
    }

    #[test]
    fn degenerate_products_are_excluded() {
        let store = store_of(&[
            ("a", vec![1.0, 0.0]),
            ("b", vec![1.0, 0.1]),
            ("z", vec![0.0, 0.0]),
        ]);
        let e = HashEnsemble::with_defaults(2, 1);
        let out = mine_rules(&store, &e, &MiningOptions::default(), None).unwrap();
        assert_eq!(out.excluded, vec!["z".to_string()]);
    }

    #[test]
    fn rejects_bad_arguments() {
        let store = store_of(&[("a", vec![1.0, 0.0])]);
        let e = HashEnsemble::with_defaults(2, 1);
        let opts = MiningOptions {
            top_k: 0,
            ..MiningOptions::default()
        };
        assert!(matches!(mine_rules(&store, &e, &opts, None), Err(Error::InvalidArgument(_))));
        assert!(matches!(
            mine_rules(&store, &e, &MiningOptions::default(), None),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn guard_limits() {
        assert_eq!(BucketGuard::SqrtN(2.0).limit(100, 4), 20);
        assert_eq!(BucketGuard::MeanMultiple(4.0).limit(1000, 4), 250);
        assert_eq!(BucketGuard::Off.limit(5, 4), usize::MAX);
        assert_eq!(BucketGuard::DEFAULT.limit(1000, 4), 250);
        assert_eq!(BucketGuard::DEFAULT.limit(100, 4), 25);
        assert_eq!(BucketGuard::DEFAULT.limit(16, 8), 8);
    }

    #[test]
    fn jsonl_has_null_lift() {
        let rules = vec![AssociationRule {
            product_a: "a".into(),
            product_b: "b".into(),
            collision_count: 3,
            cosine: 0.5,
            lift: None,
        }];
        let mut out = Vec::new();
        write_rules_jsonl(&rules, &mut out).unwrap();
        assert_eq!(
            String::from_utf8(out).unwrap(),
            "{\"product_a\":\"a\",\"product_b\":\"b\",\"collision_count\":3,\"cosine\":0.5,\"lift\":null}\n"
        );
    }
}
