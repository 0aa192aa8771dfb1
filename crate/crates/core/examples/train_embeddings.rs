// Online training over a synthetic stream with planted product pairs, then
// a snapshot round trip.

use basketflow::model::{cosine, Hyperparameters};
use basketflow::ome::OnlineTrainer;
use basketflow::snapshot::{read_snapshot, write_snapshot};
use basketflow::synthetic::{PlantedStream, PlantedStreamConfig};
use basketflow::UnitId;

pub fn main() {
    let stream = PlantedStream::generate(&PlantedStreamConfig {
        products: 300,
        users: 50,
        baskets: 3000,
        windows: 10,
        planted_pairs: 10,
        pair_rate: 0.03,
        seed: 5,
        ..PlantedStreamConfig::default()
    });
    let hp = Hyperparameters { dim: 16, epochs: 5, seed: 5, ..Hyperparameters::default() };
    let mut trainer = OnlineTrainer::new(hp);
    let mut store = trainer.new_store();
    for w in &stream.windows {
        let r = trainer.train_window(w, &mut store);
        println!(
            "window {:>2}: {:>4} baskets {:>6} tasks  loss {:.4}  new units {}",
            r.window, r.baskets, r.tasks, r.mean_loss, r.units_initialized
        );
    }

    let vec = |p: &str| store.vector_of(&UnitId::product(p)).unwrap();
    let (a, b) = &stream.planted[0];
    println!("planted  cos({a},{b}) = {:.3}", cosine(vec(a), vec(b)));
    let (c, _) = &stream.planted[1];
    println!("unrelated cos({a},{c}) = {:.3}", cosine(vec(a), vec(c)));

    let mut bytes = Vec::new();
    write_snapshot(&store, &mut bytes).unwrap();
    let restored = read_snapshot(bytes.as_slice()).unwrap();
    assert_eq!(restored, store);
    println!("snapshot: {} units, {} bytes", restored.len(), bytes.len());
}
