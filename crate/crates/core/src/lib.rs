//! Joint word-entity embeddings over an annotated wiki-style corpus, plus a
//! supervised named-entity-disambiguation (NED) pipeline built on top of
//! them.
//!
//! The crate follows the pipeline stages:
//!
//! * [`corpus`] — parse the line-delimited corpus into pages, build the
//!   vocabulary, the entity link graph, and anchor statistics.
//! * [`embedding`] — train the joint word/entity embedding with three
//!   skip-gram-style objectives (word context, KB graph, anchor context)
//!   using negative sampling and lock-free parallel SGD.
//! * [`similarity`] — cosine and link-based relatedness, candidate ranking,
//!   and the NDCG/MAP evaluation harness.
//! * [`gbrt`] — gradient-boosted regression trees with logistic loss, the
//!   point-wise candidate ranker.
//! * [`ned`] — candidate generation, the ranking feature set, the two-step
//!   disambiguation procedure, and micro/macro evaluation.
//! * [`synth`] — deterministic synthetic corpora and document sets for
//!   tests and benchmarks.
//!
//! Compiled with the `parallel` feature (default), training and batch
//! disambiguation can fan out over rayon workers; without it every code
//! path falls back to the sequential implementation.

pub mod corpus;
pub mod embedding;
pub mod error;
pub mod gbrt;
pub mod ned;
pub mod similarity;
pub mod synth;

pub use error::{Error, Result};
