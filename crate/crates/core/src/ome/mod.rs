//! Online joint product/user embedding.
//!
//! Every unit of a basket is recovered from the rest of the basket. The
//! context of a product is the average of the user vector and the
//! price-weighted mean of the other products; the context of a user is the
//! price-weighted product mean alone. Training uses negative sampling, a
//! per-basket learning rate that shrinks when the basket is already well fit,
//! and AdaGrad scaling per coordinate.

mod noise;
mod trainer;

pub use noise::{NoiseDistribution, NoiseTable, MAX_RESAMPLE_ATTEMPTS};
pub use trainer::{OnlineTrainer, TrainReport};

use crate::model::{dot, sigmoid, EmbeddingStore, UnitIndex, UnitKind};

/// Popularity power law of item appearance versus price: `p = 1.3 * price^-2.3`.
pub const PRICE_POWER_SCALE: f64 = 1.3;
pub const PRICE_POWER_EXPONENT: f64 = 2.3;
/// Prices are floored here before exponentiation so free items keep a finite weight.
pub const PRICE_FLOOR: f64 = 0.01;
/// Score arguments are clamped to this range before the log-sigmoid.
pub const SCORE_CLAMP: f64 = 30.0;
pub const ADAGRAD_EPS: f64 = 1e-8;

/// Inverse appearance probability of a product at `price`, clipped at `clip`.
pub fn value_weight(price: f64, clip: f64) -> f64 {
    let p = price.max(PRICE_FLOOR).min(clip);
    p.powf(PRICE_POWER_EXPONENT) / PRICE_POWER_SCALE
}

/// Context weight of a basket item: neutral (1) when weighting is off or the
/// price is unknown.
pub fn item_weight(price: Option<f64>, clip: f64, enabled: bool) -> f64 {
    match price {
        Some(p) if enabled => value_weight(p, clip),
        _ => 1.0,
    }
}

/// `exp(-tau * psi) * eta`.
pub fn adaptive_lr(psi: f64, tau: f64, eta: f64) -> f64 {
    (-tau * psi).exp() * eta
}

/// Mean `σ(v_i · v_j)` over unordered pairs of distinct units, on raw
/// vectors. Fewer than two units gives the neutral 0.5.
pub fn intra_agreement(units: &[UnitIndex], store: &EmbeddingStore) -> f64 {
    if units.len() < 2 {
        log::debug!("intra-agreement of a basket with {} unit(s)", units.len());
        return 0.5;
    }
    let mut total = 0.0;
    let mut pairs = 0usize;
    for (k, &a) in units.iter().enumerate() {
        for &b in &units[k + 1..] {
            total += sigmoid(dot(store.vector(a), store.vector(b)));
            pairs += 1;
        }
    }
    total / pairs as f64
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightedUnit {
    pub unit: UnitIndex,
    pub weight: f64,
}

/// Recover `target` from the rest of its basket.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainTask {
    pub target: UnitIndex,
    pub kind: UnitKind,
    /// The basket's user; present for product targets only.
    pub user: Option<UnitIndex>,
    /// Context products with their value weights.
    pub products: Vec<WeightedUnit>,
}

impl TrainTask {
    pub fn product(target: UnitIndex, user: UnitIndex, products: Vec<WeightedUnit>) -> Self {
        TrainTask {
            target,
            kind: UnitKind::Product,
            user: Some(user),
            products,
        }
    }

    /// `None` when the basket has no product to recover the user from.
    pub fn user(target: UnitIndex, products: Vec<WeightedUnit>) -> Option<Self> {
        (!products.is_empty()).then_some(TrainTask {
            target,
            kind: UnitKind::User,
            user: None,
            products,
        })
    }

    /// Coefficient of each context unit inside the context vector.
    pub fn context_coefficients(&self) -> Vec<(UnitIndex, f64)> {
        let total: f64 = self.products.iter().map(|p| p.weight).sum();
        let mean = |share: f64| {
            self.products
                .iter()
                .map(move |p| (p.unit, share * p.weight / total))
        };
        match (self.kind, self.user) {
            (UnitKind::Product, Some(u)) if self.products.is_empty() => vec![(u, 1.0)],
            (UnitKind::Product, Some(u)) => std::iter::once((u, 0.5)).chain(mean(0.5)).collect(),
            _ => mean(1.0).collect(),
        }
    }
}

/// The context vector `h` the target is scored against.
pub fn context_vector(task: &TrainTask, store: &EmbeddingStore) -> Vec<f64> {
    let mut h = vec![0.0; store.dim()];
    for (unit, c) in task.context_coefficients() {
        for (hi, vi) in h.iter_mut().zip(store.vector(unit)) {
            *hi += c * vi;
        }
    }
    h
}

/// `-log σ(x)` with `x` clamped to `±SCORE_CLAMP`.
#[inline]
fn neg_log_sigmoid(x: f64) -> f64 {
    let x = x.clamp(-SCORE_CLAMP, SCORE_CLAMP);
    (1.0 + (-x).exp()).ln()
}

/// Loss of one task and its gradient per unit. Repeated units (a negative
/// that is also a context unit, duplicate negatives) are merged.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskGradients {
    pub loss: f64,
    pub grads: Vec<(UnitIndex, Vec<f64>)>,
}

impl TaskGradients {
    fn add(&mut self, unit: UnitIndex, scale: f64, v: &[f64]) {
        let slot = match self.grads.iter().position(|(u, _)| *u == unit) {
            Some(i) => i,
            None => {
                self.grads.push((unit, vec![0.0; v.len()]));
                self.grads.len() - 1
            }
        };
        for (g, x) in self.grads[slot].1.iter_mut().zip(v) {
            *g += scale * x;
        }
    }

    pub fn get(&self, unit: UnitIndex) -> Option<&[f64]> {
        self.grads
            .iter()
            .find(|(u, _)| *u == unit)
            .map(|(_, g)| g.as_slice())
    }
}

/// Negative-sampling loss
/// `-log σ(v_z·h) - Σ_n log σ(-v_n·h)` and its exact gradient, including
/// the chain through `h` into the user and context products.
pub fn task_loss_and_grads(
    task: &TrainTask,
    negatives: &[UnitIndex],
    store: &EmbeddingStore,
) -> TaskGradients {
    let h = context_vector(task, store);
    let mut out = TaskGradients {
        loss: 0.0,
        grads: Vec::with_capacity(negatives.len() + task.products.len() + 2),
    };
    let mut grad_h = vec![0.0; h.len()];

    let vz = store.vector(task.target);
    let s = dot(vz, &h);
    out.loss += neg_log_sigmoid(s);
    let coef = sigmoid(s.clamp(-SCORE_CLAMP, SCORE_CLAMP)) - 1.0;
    out.add(task.target, coef, &h);
    for (g, v) in grad_h.iter_mut().zip(vz) {
        *g += coef * v;
    }

    for &n in negatives {
        let vn = store.vector(n);
        let s = dot(vn, &h);
        out.loss += neg_log_sigmoid(-s);
        let coef = sigmoid(s.clamp(-SCORE_CLAMP, SCORE_CLAMP));
        out.add(n, coef, &h);
        for (g, v) in grad_h.iter_mut().zip(vn) {
            *g += coef * v;
        }
    }

    for (unit, c) in task.context_coefficients() {
        out.add(unit, c, &grad_h);
    }
    out
}

/// Exact softmax probability of recovering each unit of the target's kind
/// from the task's context. Only sensible for small catalogs.
pub fn recovery_probabilities(task: &TrainTask, store: &EmbeddingStore) -> Vec<(UnitIndex, f64)> {
    let h = context_vector(task, store);
    let scores: Vec<(UnitIndex, f64)> = (0..store.len())
        .filter(|&i| store.unit(i).kind == task.kind)
        .map(|i| (i, dot(store.vector(i), &h)))
        .collect();
    let max = scores
        .iter()
        .map(|(_, s)| *s)
        .fold(f64::NEG_INFINITY, f64::max);
    let norm: f64 = scores.iter().map(|(_, s)| (s - max).exp()).sum();
    scores
        .into_iter()
        .map(|(i, s)| (i, (s - max).exp() / norm))
        .collect()
}
