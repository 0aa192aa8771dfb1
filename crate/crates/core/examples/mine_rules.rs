// Mine association rules from trained embeddings and score them with exact
// lift.

use std::collections::HashSet;

use basketflow::arm::{mine_rules, HashEnsemble, MiningOptions};
use basketflow::model::Hyperparameters;
use basketflow::ome::OnlineTrainer;
use basketflow::stats::CooccurrenceIndex;
use basketflow::synthetic::{PlantedStream, PlantedStreamConfig};

pub fn main() {
    let stream = PlantedStream::generate(&PlantedStreamConfig {
        products: 400,
        users: 80,
        baskets: 4000,
        windows: 10,
        planted_pairs: 15,
        pair_rate: 0.02,
        seed: 11,
        ..PlantedStreamConfig::default()
    });
    let hp = Hyperparameters { dim: 32, epochs: 10, seed: 11, ..Hyperparameters::default() };
    let mut trainer = OnlineTrainer::new(hp);
    let mut store = trainer.new_store();
    trainer.train_stream(&stream.windows, &mut store);

    let index = CooccurrenceIndex::build(&stream.baskets);
    let ensemble = HashEnsemble::with_defaults(32, 11);
    let opts = MiningOptions { top_k: 20, ..MiningOptions::default() };
    let out = mine_rules(&store, &ensemble, &opts, Some(&index)).unwrap();

    let planted: HashSet<_> = stream.planted.iter().cloned().collect();
    for r in &out.rules {
        let mark = if planted.contains(&(r.product_a.clone(), r.product_b.clone())) { "*" } else { " " };
        let lift = r.lift.map_or("-".into(), |l| format!("{l:.1}"));
        println!(
            "{mark} {} -> {}  collisions {:>2}  cos {:.3}  lift {lift}",
            r.product_a, r.product_b, r.collision_count, r.cosine
        );
    }
    println!("{} candidate pairs, {} oversized buckets skipped", out.candidate_pairs, out.skipped_buckets);
}
