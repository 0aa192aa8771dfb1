//! Synthetic basket streams with planted product associations.
//!
//! Background products follow a Zipf popularity law, mixed with a small
//! private pool per user so users have repeat-purchase habits. Each planted
//! pair is dropped into a basket independently with a fixed rate, and planted
//! products appear nowhere else, so their lift is roughly `1 / rate`.

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

use crate::ingest::window_stream;
use crate::model::{Basket, Window, SECONDS_PER_DAY};

/// Replace some planted pairs by fresh ones partway through the stream. The
/// retired products keep selling at the same rate, but independently.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairSwap {
    pub window: usize,
    pub count: usize,
}

/// Expensive, rarely bought pairs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RarePairs {
    pub pairs: usize,
    pub rate: f64,
    pub min_price: f64,
    pub max_price: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlantedStreamConfig {
    pub products: usize,
    pub users: usize,
    pub baskets: usize,
    pub windows: usize,
    pub planted_pairs: usize,
    /// Per-basket inclusion probability of each planted pair.
    pub pair_rate: f64,
    /// Mean number of background products per basket (at least one is drawn).
    pub background_mean: f64,
    pub user_pool: usize,
    /// Share of background draws taken from the user's pool.
    pub pool_share: f64,
    pub zipf_exponent: f64,
    pub swap: Option<PairSwap>,
    pub rare: Option<RarePairs>,
    pub seed: u64,
}

impl Default for PlantedStreamConfig {
    fn default() -> Self {
        PlantedStreamConfig {
            products: 1000,
            users: 200,
            baskets: 20_000,
            windows: 30,
            planted_pairs: 50,
            pair_rate: 0.015,
            background_mean: 3.0,
            user_pool: 10,
            pool_share: 0.5,
            zipf_exponent: 0.8,
            swap: None,
            rare: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PlantedStream {
    pub baskets: Vec<Basket>,
    pub windows: Vec<Window>,
    /// Pairs active from the start (including those later retired).
    pub planted: Vec<(String, String)>,
    pub retired: Vec<(String, String)>,
    pub introduced: Vec<(String, String)>,
    pub rare: Vec<(String, String)>,
}

pub fn product_id(i: usize) -> String {
    format!("p{i:04}")
}

fn ordered(a: String, b: String) -> (String, String) {
    if a <= b { (a, b) } else { (b, a) }
}

impl PlantedStream {
    pub fn generate(cfg: &PlantedStreamConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let swap_count = cfg.swap.map_or(0, |s| s.count.min(cfg.planted_pairs));
        let rare_pairs = cfg.rare.map_or(0, |r| r.pairs);
        let reserved = 2 * (cfg.planted_pairs + swap_count + rare_pairs);
        assert!(
            cfg.products > reserved + cfg.user_pool,
            "catalog too small for the planted structure"
        );

        // Layout: planted | swap-ins | rare | background.
        let planted_ids: Vec<(usize, usize)> = (0..cfg.planted_pairs).map(|k| (2 * k, 2 * k + 1)).collect();
        let swap_base = 2 * cfg.planted_pairs;
        let introduced_ids: Vec<(usize, usize)> = (0..swap_count)
            .map(|k| (swap_base + 2 * k, swap_base + 2 * k + 1))
            .collect();
        let rare_base = swap_base + 2 * swap_count;
        let rare_ids: Vec<(usize, usize)> = (0..rare_pairs)
            .map(|k| (rare_base + 2 * k, rare_base + 2 * k + 1))
            .collect();
        let background: Vec<usize> = (reserved..cfg.products).collect();

        let mut prices = vec![0.0; cfg.products];
        for p in prices.iter_mut() {
            *p = (rng.random_range(0.5f64..6.0) * 100.0).round() / 100.0;
        }
        if let Some(r) = cfg.rare {
            for &(a, b) in &rare_ids {
                prices[a] = (rng.random_range(r.min_price..r.max_price) * 100.0).round() / 100.0;
                prices[b] = (rng.random_range(r.min_price..r.max_price) * 100.0).round() / 100.0;
            }
        }

        // Zipf weights over a shuffled background ordering.
        let mut by_rank = background.clone();
        by_rank.shuffle(&mut rng);
        let mut cumulative = Vec::with_capacity(by_rank.len());
        let mut total = 0.0;
        for r in 0..by_rank.len() {
            total += 1.0 / ((r + 1) as f64).powf(cfg.zipf_exponent);
            cumulative.push(total);
        }
        let pools: Vec<Vec<usize>> = (0..cfg.users)
            .map(|_| {
                background
                    .choose_multiple(&mut rng, cfg.user_pool)
                    .copied()
                    .collect()
            })
            .collect();
        let extra = Poisson::new((cfg.background_mean - 1.0).max(1e-9)).expect("valid rate");

        let swap_at = cfg.swap.map(|s| s.window);
        let mut baskets = Vec::with_capacity(cfg.baskets);
        for i in 0..cfg.baskets {
            let window = i * cfg.windows / cfg.baskets;
            let within = (i * cfg.windows) % cfg.baskets;
            let ts = window as f64 * SECONDS_PER_DAY
                + (within as f64 / cfg.baskets as f64 * (SECONDS_PER_DAY - 1.0)).floor();
            let user = rng.random_range(0..cfg.users);
            let mut items: Vec<usize> = Vec::new();
            let swapped = swap_at.is_some_and(|w| window >= w);

            for (k, &(a, b)) in planted_ids.iter().enumerate() {
                let retired = swapped && k < swap_count;
                if retired {
                    if rng.random_bool(cfg.pair_rate) {
                        items.push(a);
                    }
                    if rng.random_bool(cfg.pair_rate) {
                        items.push(b);
                    }
                } else if rng.random_bool(cfg.pair_rate) {
                    items.extend([a, b]);
                }
            }
            if swapped {
                for &(a, b) in &introduced_ids {
                    if rng.random_bool(cfg.pair_rate) {
                        items.extend([a, b]);
                    }
                }
            }
            if let Some(r) = cfg.rare {
                for &(a, b) in &rare_ids {
                    if rng.random_bool(r.rate) {
                        items.extend([a, b]);
                    }
                }
            }
            let n_bg = 1 + extra.sample(&mut rng) as usize;
            for _ in 0..n_bg {
                let p = if rng.random_bool(cfg.pool_share) {
                    pools[user][rng.random_range(0..cfg.user_pool)]
                } else {
                    let r = rng.random_range(0.0..total);
                    by_rank[cumulative.partition_point(|&c| c <= r).min(by_rank.len() - 1)]
                };
                items.push(p);
            }
            items.shuffle(&mut rng);

            let mut basket = Basket::new(format!("b{i:06}"), ts, format!("u{user:03}"));
            for p in items {
                basket.push_item(product_id(p), Some(prices[p]));
            }
            baskets.push(basket);
        }
        let windows = window_stream(&baskets, 1).expect("generated in order");
        let name = |v: &[(usize, usize)]| -> Vec<(String, String)> {
            v.iter()
                .map(|&(a, b)| ordered(product_id(a), product_id(b)))
                .collect()
        };
        PlantedStream {
            planted: name(&planted_ids),
            retired: name(&planted_ids[..swap_count]),
            introduced: name(&introduced_ids),
            rare: name(&rare_ids),
            baskets,
            windows,
        }
    }
}

/// Users rebuying from private product pools (`exchangeable = false`), or
/// all users drawing from one shared distribution (`exchangeable = true`).
pub fn repeat_buyer_corpus(
    users: usize,
    baskets_per_user: usize,
    pool: usize,
    catalog: usize,
    items_per_basket: usize,
    exchangeable: bool,
    seed: u64,
) -> Vec<Basket> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let all: Vec<usize> = (0..catalog).collect();
    let pools: Vec<Vec<usize>> = (0..users)
        .map(|_| all.choose_multiple(&mut rng, pool).copied().collect())
        .collect();
    let mut out = Vec::with_capacity(users * baskets_per_user);
    for k in 0..baskets_per_user {
        for (u, own) in pools.iter().enumerate() {
            let source: &[usize] = if exchangeable { &all } else { own };
            let mut b = Basket::new(
                format!("b{:06}", k * users + u),
                (k * users + u) as f64,
                format!("u{u:03}"),
            );
            for p in source.choose_multiple(&mut rng, items_per_basket.min(source.len())) {
                b.push_item(product_id(*p), Some(1.0));
            }
            out.push(b);
        }
    }
    out
}
