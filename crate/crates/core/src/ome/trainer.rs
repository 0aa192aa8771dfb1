use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::{
    adaptive_lr, intra_agreement, item_weight, task_loss_and_grads, NoiseDistribution,
    TaskGradients, TrainTask, WeightedUnit, ADAGRAD_EPS,
};
use crate::model::{
    Basket, EmbeddingStore, ExecutionMode, Hyperparameters, UnitId, UnitIndex, UnitKind, Window,
};
use crate::seeds;

/// Baskets per synchronous batch in parallel mode.
const PARALLEL_BATCH: usize = 256;

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct TrainReport {
    pub window: usize,
    pub baskets: usize,
    pub tasks: u64,
    pub mean_loss: f64,
    pub units_initialized: usize,
    pub skipped_updates: u64,
}

/// A basket resolved to store indices.
#[derive(Debug, Clone)]
struct Resolved {
    user: UnitIndex,
    products: Vec<WeightedUnit>,
}

impl Resolved {
    fn units(&self) -> Vec<UnitIndex> {
        std::iter::once(self.user)
            .chain(self.products.iter().map(|p| p.unit))
            .collect()
    }

    /// Product-recovery tasks in item order, then the user task.
    fn tasks(&self) -> impl Iterator<Item = TrainTask> + '_ {
        let products = (0..self.products.len()).map(move |k| {
            let context: Vec<WeightedUnit> = self
                .products
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != k)
                .map(|(_, p)| *p)
                .collect();
            TrainTask::product(self.products[k].unit, self.user, context)
        });
        products.chain(TrainTask::user(self.user, self.products.clone()))
    }
}

/// Incremental trainer: owns the negative-sampling tables and the random
/// streams, and consumes one window at a time.
#[derive(Debug, Clone)]
pub struct OnlineTrainer {
    hp: Hyperparameters,
    noise: NoiseDistribution,
    init_rng: ChaCha8Rng,
    sample_rng: ChaCha8Rng,
}

impl OnlineTrainer {
    pub fn new(hp: Hyperparameters) -> Self {
        OnlineTrainer {
            noise: NoiseDistribution::new(hp.noise),
            init_rng: seeds::rng(hp.seed, seeds::INIT),
            sample_rng: seeds::rng(hp.seed, seeds::NEGATIVES),
            hp,
        }
    }

    pub fn hyperparameters(&self) -> &Hyperparameters {
        &self.hp
    }

    pub fn noise(&self) -> &NoiseDistribution {
        &self.noise
    }

    pub fn new_store(&self) -> EmbeddingStore {
        EmbeddingStore::new(self.hp.dim)
    }

    fn resolve(&mut self, basket: &Basket, store: &mut EmbeddingStore, fresh: &mut usize) -> Resolved {
        let mut intern = |unit: UnitId, store: &mut EmbeddingStore| {
            let (idx, new) = store.ensure(&unit, &mut self.init_rng);
            *fresh += usize::from(new);
            store.record_occurrence(idx);
            self.noise.observe(unit.kind, idx);
            idx
        };
        let user = intern(basket.user_unit(), store);
        let products = basket
            .items
            .iter()
            .map(|item| WeightedUnit {
                unit: intern(UnitId::product(item.product.clone()), store),
                weight: item_weight(item.price, self.hp.price_clip, self.hp.value_weighting),
            })
            .collect();
        Resolved { user, products }
    }

    /// Trains `hp.epochs` passes over the window. Unseen units are
    /// initialized on first sight and the noise tables absorb the window
    /// before the first pass.
    pub fn train_window(&mut self, window: &Window, store: &mut EmbeddingStore) -> TrainReport {
        let mut report = TrainReport {
            window: window.index,
            baskets: window.baskets.len(),
            ..TrainReport::default()
        };
        let mut fresh = 0usize;
        let resolved: Vec<Resolved> = window
            .baskets
            .iter()
            .filter(|b| !b.items.is_empty())
            .map(|b| self.resolve(b, store, &mut fresh))
            .collect();
        self.noise.seal();
        report.units_initialized = fresh;

        let mut loss_sum = 0.0;
        let mut order: Vec<usize> = (0..resolved.len()).collect();
        for _ in 0..self.hp.epochs {
            order.shuffle(&mut self.sample_rng);
            match self.hp.mode {
                ExecutionMode::Deterministic => {
                    for &b in &order {
                        self.train_basket(&resolved[b], store, &mut report, &mut loss_sum);
                    }
                }
                ExecutionMode::Parallel => {
                    self.train_parallel(&resolved, &order, store, &mut report, &mut loss_sum);
                }
            }
        }
        if report.tasks > 0 {
            report.mean_loss = loss_sum / report.tasks as f64;
        }
        report
    }

    fn train_basket(
        &mut self,
        basket: &Resolved,
        store: &mut EmbeddingStore,
        report: &mut TrainReport,
        loss_sum: &mut f64,
    ) {
        let psi = intra_agreement(&basket.units(), store);
        let lr = adaptive_lr(psi, self.hp.tau, self.hp.eta);
        for task in basket.tasks() {
            let negatives = match self.noise.sample_negatives(
                task.kind,
                self.hp.negatives,
                task.target,
                &mut self.sample_rng,
            ) {
                Ok(n) => n,
                Err(e) => {
                    log::warn!("skipping task: {e}");
                    continue;
                }
            };
            let grads = task_loss_and_grads(&task, &negatives, store);
            apply(&grads, lr, store, report, loss_sum);
        }
    }

    /// Synchronous data-parallel pass: each batch computes all basket
    /// gradients against the same frozen store, then applies them in order.
    fn train_parallel(
        &mut self,
        resolved: &[Resolved],
        order: &[usize],
        store: &mut EmbeddingStore,
        report: &mut TrainReport,
        loss_sum: &mut f64,
    ) {
        for batch in order.chunks(PARALLEL_BATCH) {
            let batch_seed: u64 = self.sample_rng.random();
            let frozen: &EmbeddingStore = store;
            let noise = &self.noise;
            let hp = &self.hp;
            let updates: Vec<(f64, Vec<TaskGradients>)> = batch
                .par_iter()
                .enumerate()
                .map(|(k, &b)| {
                    let mut rng = ChaCha8Rng::seed_from_u64(batch_seed ^ (k as u64).rotate_left(32));
                    let basket = &resolved[b];
                    let psi = intra_agreement(&basket.units(), frozen);
                    let lr = adaptive_lr(psi, hp.tau, hp.eta);
                    let grads = basket
                        .tasks()
                        .filter_map(|task| {
                            let negatives = noise
                                .sample_negatives(task.kind, hp.negatives, task.target, &mut rng)
                                .ok()?;
                            Some(task_loss_and_grads(&task, &negatives, frozen))
                        })
                        .collect();
                    (lr, grads)
                })
                .collect();
            for (lr, grads) in updates {
                for g in &grads {
                    apply(g, lr, store, report, loss_sum);
                }
            }
        }
    }

    /// Trains every window in order.
    pub fn train_stream<'a>(
        &mut self,
        windows: impl IntoIterator<Item = &'a Window>,
        store: &mut EmbeddingStore,
    ) -> Vec<TrainReport> {
        windows
            .into_iter()
            .map(|w| self.train_window(w, store))
            .collect()
    }

    pub fn unit_kind_count(&self, kind: UnitKind) -> usize {
        self.noise.table(kind).len()
    }
}

fn apply(
    grads: &TaskGradients,
    lr: f64,
    store: &mut EmbeddingStore,
    report: &mut TrainReport,
    loss_sum: &mut f64,
) {
    for (unit, g) in &grads.grads {
        if !store.adagrad_step(*unit, g, lr, ADAGRAD_EPS) {
            report.skipped_updates += 1;
        }
    }
    store.bump_steps();
    report.tasks += 1;
    *loss_sum += grads.loss;
}
