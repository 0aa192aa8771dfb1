// Exact support and lift, and the count-based retrieval baselines.

use basketflow::stats::{baseline_score, Baseline, CooccurrenceIndex};
use basketflow::Basket;

pub fn main() {
    let baskets = [
        Basket::new("1", 0.0, "u1").with_items([("A", 1.0), ("B", 1.0)]),
        Basket::new("2", 1.0, "u1").with_items([("A", 1.0), ("B", 1.0)]),
        Basket::new("3", 2.0, "u2").with_items([("A", 1.0), ("C", 1.0)]),
        Basket::new("4", 3.0, "u2").with_items([("B", 1.0), ("C", 1.0)]),
        Basket::new("5", 4.0, "u3").with_items([("C", 1.0), ("D", 1.0)]),
    ];
    let index = CooccurrenceIndex::build(&baskets);

    println!("support(A)   = {}", index.support(&["A"]).unwrap());
    println!("support(A,B) = {}", index.support(&["A", "B"]).unwrap());
    for (x, y) in [("A", "B"), ("A", "C"), ("C", "D"), ("A", "D")] {
        println!("lift({x},{y}) = {:.4}", index.lift(x, y).unwrap());
    }
    match index.lift("A", "Z") {
        Ok(l) => println!("lift(A,Z) = {l}"),
        Err(e) => println!("lift(A,Z): {e}"),
    }

    let context = ["A"];
    for method in [Baseline::Pop, Baseline::Sup, Baseline::Lift] {
        let scores: Vec<String> = ["B", "C", "D"]
            .iter()
            .map(|c| format!("{c}={:.3}", baseline_score(c, &context, &index, method)))
            .collect();
        println!("{method:?} given A: {}", scores.join(" "));
    }

    // Growing the index window by window gives the same counts.
    let mut incremental = CooccurrenceIndex::new();
    for b in &baskets {
        incremental.add_basket(b);
    }
    assert_eq!(incremental, index);
}
