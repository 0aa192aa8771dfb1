use basketflow::model::UnitId;
use basketflow::ome::{task_loss_and_grads, TrainTask, WeightedUnit};
use basketflow::EmbeddingStore;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_store(n_products: usize, n_users: usize, dim: usize, scale: f64, rng: &mut impl Rng) -> EmbeddingStore {
    let mut store = EmbeddingStore::new(dim);
    for i in 0..n_products {
        let v: Vec<f64> = (0..dim).map(|_| rng.random_range(-scale..scale)).collect();
        store.insert(UnitId::product(format!("p{i}")), &v);
    }
    for i in 0..n_users {
        let v: Vec<f64> = (0..dim).map(|_| rng.random_range(-scale..scale)).collect();
        store.insert(UnitId::user(format!("u{i}")), &v);
    }
    store
}

fn loss(task: &TrainTask, negs: &[usize], store: &EmbeddingStore) -> f64 {
    task_loss_and_grads(task, negs, store).loss
}

/// Worst relative error between analytic and central-difference gradients,
/// measured per unit vector.
fn worst_error(task: &TrainTask, negs: &[usize], store: &mut EmbeddingStore) -> f64 {
    let analytic = task_loss_and_grads(task, negs, store);
    let eps = 1e-5;
    let mut worst: f64 = 0.0;
    for (unit, grad) in &analytic.grads {
        let mut numeric = vec![0.0; grad.len()];
        for j in 0..grad.len() {
            let x = store.vector(*unit)[j];
            store.vector_mut(*unit)[j] = x + eps;
            let up = loss(task, negs, store);
            store.vector_mut(*unit)[j] = x - eps;
            let down = loss(task, negs, store);
            store.vector_mut(*unit)[j] = x;
            numeric[j] = (up - down) / (2.0 * eps);
        }
        let diff: f64 = grad.iter().zip(&numeric).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let size = grad.iter().map(|a| a * a).sum::<f64>().sqrt().max(numeric.iter().map(|a| a * a).sum::<f64>().sqrt());
        worst = worst.max(if size < 1e-9 { diff } else { diff / size });
    }
    worst
}

#[test]
fn negative_that_is_also_context() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut store = random_store(5, 1, 6, 1.0, &mut rng);
    let task = TrainTask::product(
        0,
        5,
        vec![WeightedUnit { unit: 1, weight: 3.0 }, WeightedUnit { unit: 2, weight: 0.4 }],
    );
    assert!(worst_error(&task, &[1, 3, 3], &mut store) < 1e-6);
}

#[test]
fn user_task_and_lone_product() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut store = random_store(6, 2, 8, 0.8, &mut rng);
    let user = TrainTask::user(6, vec![WeightedUnit { unit: 0, weight: 1.0 }, WeightedUnit { unit: 4, weight: 2.0 }]).unwrap();
    assert!(worst_error(&user, &[7], &mut store) < 1e-6);
    let lone = TrainTask::product(2, 7, vec![]);
    assert!(worst_error(&lone, &[0, 1, 5], &mut store) < 1e-6);
}

#[test]
fn saturated_scores_have_zero_gradient_outside_clamp() {
    let mut store = EmbeddingStore::new(2);
    store.insert(UnitId::product("a"), &[10.0, 0.0]);
    store.insert(UnitId::product("b"), &[10.0, 0.0]);
    store.insert(UnitId::user("u"), &[10.0, 0.0]);
    let task = TrainTask::product(0, 2, vec![WeightedUnit { unit: 1, weight: 1.0 }]);
    let g = task_loss_and_grads(&task, &[], &store);
    assert!(g.loss < 1e-12);
    assert!(g.get(0).unwrap().iter().all(|x| x.abs() < 1e-12));
}
