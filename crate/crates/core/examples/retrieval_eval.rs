// Intra-basket retrieval: hold out one product per query and rank it among
// sampled negatives, for the embedding scorer and the count baselines.

use basketflow::eval::{metrics, report_json, run_protocol, ProtocolConfig};
use basketflow::model::Hyperparameters;
use basketflow::synthetic::{PlantedStream, PlantedStreamConfig};

pub fn main() {
    let stream = PlantedStream::generate(&PlantedStreamConfig {
        products: 300,
        users: 60,
        baskets: 3000,
        windows: 10,
        planted_pairs: 20,
        pair_rate: 0.03,
        seed: 2,
        ..PlantedStreamConfig::default()
    });
    let hp = Hyperparameters { dim: 16, epochs: 5, seed: 2, ..Hyperparameters::default() };
    let out = run_protocol(&stream.windows, &[6, 8], &ProtocolConfig::new(hp)).unwrap();
    println!("{}", serde_json::to_string_pretty(&report_json(&out.reports)).unwrap());

    let toy = metrics(&[1, 2, 4], &[1, 3]).unwrap();
    println!("ranks [1,2,4]: mrr {:.5} r@1 {:.3} r@3 {:.3} dcg {:.4}", toy.mrr, toy.recall_at[&1], toy.recall_at[&3], toy.dcg);
}
