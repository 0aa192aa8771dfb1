//! Shared domain vocabulary: units, baskets, windows and the embedding store.

use std::collections::HashMap;
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

/// Norms below this are treated as the zero vector.
pub const DEGENERATE_NORM: f64 = 1e-12;

pub const SECONDS_PER_DAY: f64 = 86_400.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum UnitKind {
    Product,
    User,
}

impl UnitKind {
    pub fn tag(self) -> char {
        match self {
            UnitKind::Product => 'P',
            UnitKind::User => 'U',
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        match tag {
            "P" => Some(UnitKind::Product),
            "U" => Some(UnitKind::User),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            UnitKind::Product => "product",
            UnitKind::User => "user",
        }
    }
}

/// An embeddable entity. Products and users live in separate namespaces, so
/// `product:"42"` and `user:"42"` are distinct units.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct UnitId {
    pub kind: UnitKind,
    pub id: String,
}

impl UnitId {
    pub fn product(id: impl Into<String>) -> Self {
        UnitId {
            kind: UnitKind::Product,
            id: id.into(),
        }
    }

    pub fn user(id: impl Into<String>) -> Self {
        UnitId {
            kind: UnitKind::User,
            id: id.into(),
        }
    }

    pub fn is_product(&self) -> bool {
        self.kind == UnitKind::Product
    }
}

impl fmt::Display for UnitId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.kind.name(), self.id)
    }
}

/// Reserved user id for rows without a user.
pub const ANONYMOUS_USER: &str = "__anonymous__";

/// One line of a basket. `price` is the unit selling price in dollars;
/// `None` means the source carried no price column.
#[derive(Debug, Clone, PartialEq)]
pub struct Item {
    pub product: String,
    pub price: Option<f64>,
}

/// One transaction. Items are unique by product id and keep first-seen order.
#[derive(Debug, Clone, PartialEq)]
pub struct Basket {
    pub id: String,
    pub timestamp: f64,
    pub user: String,
    pub items: Vec<Item>,
}

impl Basket {
    pub fn new(id: impl Into<String>, timestamp: f64, user: impl Into<String>) -> Self {
        Basket {
            id: id.into(),
            timestamp,
            user: user.into(),
            items: Vec::new(),
        }
    }

    /// Adds an item unless the product is already present. Returns whether it
    /// was inserted.
    pub fn push_item(&mut self, product: impl Into<String>, price: Option<f64>) -> bool {
        let product = product.into();
        if self.items.iter().any(|i| i.product == product) {
            return false;
        }
        self.items.push(Item { product, price });
        true
    }

    pub fn with_items<I, S>(mut self, items: I) -> Self
    where
        I: IntoIterator<Item = (S, f64)>,
        S: Into<String>,
    {
        for (p, price) in items {
            self.push_item(p, Some(price));
        }
        self
    }

    pub fn contains(&self, product: &str) -> bool {
        self.items.iter().any(|i| i.product == product)
    }

    pub fn products(&self) -> impl Iterator<Item = &str> {
        self.items.iter().map(|i| i.product.as_str())
    }

    pub fn user_unit(&self) -> UnitId {
        UnitId::user(self.user.clone())
    }
}

/// A contiguous time interval of baskets. Index 0 starts at the midnight of
/// the earliest transaction.
#[derive(Debug, Clone, PartialEq)]
pub struct Window {
    pub index: usize,
    pub start: f64,
    pub end: f64,
    pub baskets: Vec<Basket>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseKind {
    /// Empirical unigram frequency over everything seen so far.
    Unigram,
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExecutionMode {
    Deterministic,
    Parallel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperparameters {
    pub dim: usize,
    pub eta: f64,
    pub negatives: usize,
    /// Passes over each window.
    pub epochs: usize,
    pub tau: f64,
    pub price_clip: f64,
    pub seed: u64,
    pub value_weighting: bool,
    pub noise: NoiseKind,
    pub mode: ExecutionMode,
}

impl Default for Hyperparameters {
    fn default() -> Self {
        Hyperparameters {
            dim: 300,
            eta: 0.05,
            negatives: 3,
            epochs: 50,
            tau: 0.1,
            price_clip: 10.0,
            seed: 0,
            value_weighting: true,
            noise: NoiseKind::Unigram,
            mode: ExecutionMode::Deterministic,
        }
    }
}

/// Result of [`normalize`].
#[derive(Debug, Clone, PartialEq)]
pub struct Normalized {
    pub vector: Vec<f64>,
    pub degenerate: bool,
}

/// Scales `v` to unit L2 norm. Vectors with norm below [`DEGENERATE_NORM`]
/// come back unchanged with `degenerate` set.
pub fn normalize(v: &[f64]) -> Normalized {
    let n = norm(v);
    if n < DEGENERATE_NORM {
        return Normalized {
            vector: v.to_vec(),
            degenerate: true,
        };
    }
    Normalized {
        vector: v.iter().map(|x| x / n).collect(),
        degenerate: false,
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

/// Cosine similarity; 0 when either side is degenerate.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let na = norm(a);
    let nb = norm(b);
    if na < DEGENERATE_NORM || nb < DEGENERATE_NORM {
        return 0.0;
    }
    (dot(a, b) / (na * nb)).clamp(-1.0, 1.0)
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Dense index of a unit inside an [`EmbeddingStore`].
pub type UnitIndex = usize;

/// Array-backed embeddings plus AdaGrad accumulators. Unit ids are interned
/// to dense indices in first-seen order; that mapping is part of the state.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingStore {
    dim: usize,
    units: Vec<UnitId>,
    lookup: HashMap<UnitId, UnitIndex>,
    vectors: Vec<f64>,
    accum: Vec<f64>,
    occurrences: Vec<u64>,
    step_count: u64,
}

impl EmbeddingStore {
    pub fn new(dim: usize) -> Self {
        assert!(dim > 0, "embedding dimension must be positive");
        EmbeddingStore {
            dim,
            units: Vec::new(),
            lookup: HashMap::new(),
            vectors: Vec::new(),
            accum: Vec::new(),
            occurrences: Vec::new(),
            step_count: 0,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.units.len()
    }

    pub fn is_empty(&self) -> bool {
        self.units.is_empty()
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    pub(crate) fn bump_steps(&mut self) {
        self.step_count += 1;
    }

    pub fn index_of(&self, unit: &UnitId) -> Option<UnitIndex> {
        self.lookup.get(unit).copied()
    }

    pub fn unit(&self, idx: UnitIndex) -> &UnitId {
        &self.units[idx]
    }

    pub fn units(&self) -> &[UnitId] {
        &self.units
    }

    pub fn vector(&self, idx: UnitIndex) -> &[f64] {
        &self.vectors[idx * self.dim..(idx + 1) * self.dim]
    }

    pub fn vector_mut(&mut self, idx: UnitIndex) -> &mut [f64] {
        &mut self.vectors[idx * self.dim..(idx + 1) * self.dim]
    }

    pub fn accumulator(&self, idx: UnitIndex) -> &[f64] {
        &self.accum[idx * self.dim..(idx + 1) * self.dim]
    }

    pub fn vector_of(&self, unit: &UnitId) -> Option<&[f64]> {
        self.index_of(unit).map(|i| self.vector(i))
    }

    /// Number of baskets the unit has been seen in during training.
    pub fn occurrences(&self, idx: UnitIndex) -> u64 {
        self.occurrences[idx]
    }

    pub(crate) fn record_occurrence(&mut self, idx: UnitIndex) {
        self.occurrences[idx] += 1;
    }

    /// Indices of every product unit, in interning order.
    pub fn product_indices(&self) -> impl Iterator<Item = UnitIndex> + '_ {
        self.units
            .iter()
            .enumerate()
            .filter(|(_, u)| u.is_product())
            .map(|(i, _)| i)
    }

    /// Returns the unit's index, initializing it with coordinates uniform in
    /// `[-0.5/d, 0.5/d]` when unseen. The flag reports a fresh insert.
    pub fn ensure<R: Rng + ?Sized>(&mut self, unit: &UnitId, rng: &mut R) -> (UnitIndex, bool) {
        if let Some(i) = self.lookup.get(unit) {
            return (*i, false);
        }
        let bound = 0.5 / self.dim as f64;
        let v: Vec<f64> = (0..self.dim)
            .map(|_| rng.random_range(-bound..bound))
            .collect();
        (self.insert(unit.clone(), &v), true)
    }

    /// Inserts or overwrites a unit's vector. New units start with a zero
    /// accumulator.
    pub fn insert(&mut self, unit: UnitId, vector: &[f64]) -> UnitIndex {
        assert_eq!(vector.len(), self.dim, "vector dimension mismatch");
        if let Some(&i) = self.lookup.get(&unit) {
            self.vector_mut(i).copy_from_slice(vector);
            return i;
        }
        let idx = self.units.len();
        self.lookup.insert(unit.clone(), idx);
        self.units.push(unit);
        self.vectors.extend_from_slice(vector);
        self.accum.extend(std::iter::repeat_n(0.0, self.dim));
        self.occurrences.push(0);
        idx
    }

    pub(crate) fn restore_unit(
        &mut self,
        unit: UnitId,
        vector: &[f64],
        accum: &[f64],
        occurrences: u64,
    ) -> UnitIndex {
        let idx = self.insert(unit, vector);
        self.accum[idx * self.dim..(idx + 1) * self.dim].copy_from_slice(accum);
        self.occurrences[idx] = occurrences;
        idx
    }

    pub(crate) fn set_step_count(&mut self, n: u64) {
        self.step_count = n;
    }

    /// AdaGrad step: accumulate `grad²` first, then move against `grad`
    /// scaled by `lr / sqrt(accum + eps)`. Returns `false` and leaves the unit
    /// untouched when the gradient is not finite.
    pub fn adagrad_step(&mut self, idx: UnitIndex, grad: &[f64], lr: f64, eps: f64) -> bool {
        if grad.iter().any(|g| !g.is_finite()) {
            return false;
        }
        let d = self.dim;
        let (vecs, accs) = (
            &mut self.vectors[idx * d..(idx + 1) * d],
            &mut self.accum[idx * d..(idx + 1) * d],
        );
        for ((v, a), g) in vecs.iter_mut().zip(accs.iter_mut()).zip(grad) {
            *a += g * g;
            *v -= lr / (*a + eps).sqrt() * g;
        }
        true
    }
}
