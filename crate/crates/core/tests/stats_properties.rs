use basketflow::ingest::window_stream;
use basketflow::stats::CooccurrenceIndex;
use basketflow::Basket;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_baskets(n: usize, catalog: usize, seed: u64) -> Vec<Basket> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let mut b = Basket::new(format!("b{i:05}"), i as f64 * 900.0, format!("u{}", rng.random_range(0..20)));
            for _ in 0..rng.random_range(1..6) {
                b.push_item(format!("p{}", rng.random_range(0..catalog)), Some(1.0));
            }
            b
        })
        .collect()
}

#[test]
fn independent_items_have_lift_near_one() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let baskets: Vec<Basket> = (0..50_000)
        .map(|i| {
            let mut b = Basket::new(format!("b{i}"), i as f64, "u");
            if rng.random_bool(0.3) {
                b.push_item("x", Some(1.0));
            }
            if rng.random_bool(0.2) {
                b.push_item("y", Some(1.0));
            }
            b.push_item("filler", Some(1.0));
            b
        })
        .collect();
    let ix = CooccurrenceIndex::build(&baskets);
    let lift = ix.lift("x", "y").unwrap();
    assert!((lift - 1.0).abs() < 0.05, "lift {lift}");
}

#[test]
fn support_is_symmetric_and_bounded() {
    let ix = CooccurrenceIndex::build(&random_baskets(500, 30, 1));
    for a in 0..30 {
        for b in 0..30 {
            let (x, y) = (format!("p{a}"), format!("p{b}"));
            if x == y {
                continue;
            }
            let s = ix.support(&[&x, &y]).unwrap();
            assert_eq!(s, ix.support(&[&y, &x]).unwrap());
            assert!(s <= ix.support(&[&x]).unwrap().min(ix.support(&[&y]).unwrap()));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]
    #[test]
    fn incremental_equals_batch(seed in any::<u64>(), n in 1usize..400) {
        let baskets = random_baskets(n, 40, seed);
        let batch = CooccurrenceIndex::build(&baskets);
        let mut inc = CooccurrenceIndex::new();
        for w in window_stream(&baskets, 1).unwrap() {
            inc.add_window(&w);
        }
        prop_assert_eq!(inc, batch);
    }
}
