//! Streaming market-basket analysis.
//!
//! * [`ingest`] turns transaction files into a chronological basket stream
//!   split into day windows.
//! * [`ome`] learns product and user embeddings online, one window at a time.
//! * [`arm`] mines association rules from the product embeddings with sign
//!   random projection hashing.
//! * [`stats`] holds exact support/lift counts, used both to score mined rules
//!   and as retrieval baselines.
//! * [`eval`] runs the intra-basket retrieval protocol and the user
//!   repeat-purchase test.
//! * [`cli`] wires the stages into commands driven by a flat config file.
//!
//! The `examples/` directory of this crate has one runnable program per
//! stage.

pub mod arm;
pub mod cli;
pub mod config;
pub mod error;
pub mod eval;
pub mod ingest;
pub mod model;
pub mod ome;
pub mod seeds;
pub mod snapshot;
pub mod stats;
pub mod synthetic;

pub use error::{Error, Result};
pub use model::{Basket, EmbeddingStore, Hyperparameters, UnitId, UnitKind, Window};
