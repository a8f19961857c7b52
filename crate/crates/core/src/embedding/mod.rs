//! Joint word-entity embedding: model, training, and persistence.

mod io;
mod matrix;
mod sampler;
mod train;

pub use matrix::{AtomicF32, SharedMatrix};
pub use sampler::{NegativeSampler, NOISE_EXPONENT};
pub use train::{
    for_each_pair, log_sigmoid, neg_gradients, neg_step, page_pairs, prepare_pages, sigmoid,
    train, EpochStats, LrSchedule, NegGradients, PairKind, PreparedPage, StepScratch, TrainPair,
    SIGMOID_CLAMP,
};

use std::sync::Arc;

use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{SymbolId, Vocabulary};
use crate::error::{Error, Result};

/// Training hyperparameters. The defaults are the reference configuration
/// for full-scale corpora: d=500, window 10, 30 negatives, alpha 0.025,
/// 10 epochs, minimum word count 5.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainingConfig {
    /// Embedding dimension `d`.
    pub dim: usize,
    /// Context window size `c` on each side.
    pub window: usize,
    /// Negative samples `g` per positive pair.
    pub negatives: usize,
    /// Initial learning rate.
    pub alpha0: f64,
    /// Full passes over the corpus.
    pub epochs: usize,
    /// Minimum word frequency kept in the vocabulary.
    pub min_count: u64,
    /// RNG seed for initialization and negative sampling.
    pub seed: u64,
    /// Training worker threads; 1 is sequential and bit-reproducible.
    pub workers: usize,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            dim: 500,
            window: 10,
            negatives: 30,
            alpha0: 0.025,
            epochs: 10,
            min_count: 5,
            seed: 1,
            workers: 1,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::config("dimension must be >= 1"));
        }
        if self.window == 0 {
            return Err(Error::config("window must be >= 1"));
        }
        if !(self.alpha0 > 0.0) || !self.alpha0.is_finite() {
            return Err(Error::config("alpha0 must be positive and finite"));
        }
        if self.epochs == 0 {
            return Err(Error::config("epochs must be >= 1"));
        }
        if self.min_count == 0 {
            return Err(Error::config("min_count must be >= 1"));
        }
        if self.workers == 0 {
            return Err(Error::config("workers must be >= 1"));
        }
        Ok(())
    }
}

/// The trained embedding: matrix `V` (the exported representation), the
/// optional output matrix `U` (needed only to resume training), and the
/// vocabulary binding.
#[derive(Debug, Clone)]
pub struct EmbeddingModel {
    vocab: Arc<Vocabulary>,
    dim: usize,
    v: Vec<f32>,
    u: Option<Vec<f32>>,
}

impl EmbeddingModel {
    /// Initializes a fresh model: `V` rows i.i.d. uniform in
    /// `[-0.5/d, 0.5/d]`, `U` all zeros. Deterministic given the seed.
    pub fn init(vocab: Arc<Vocabulary>, config: &TrainingConfig) -> Result<Self> {
        config.validate()?;
        if vocab.is_empty() {
            return Err(Error::data("cannot initialize a model over an empty vocabulary"));
        }
        let rows = vocab.len();
        let dim = config.dim;
        let bound = 0.5 / dim as f32;
        let dist = Uniform::new_inclusive(-bound, bound);
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let v: Vec<f32> = (0..rows * dim).map(|_| dist.sample(&mut rng)).collect();
        Ok(EmbeddingModel {
            vocab,
            dim,
            v,
            u: Some(vec![0.0; rows * dim]),
        })
    }

    pub(crate) fn from_parts(
        vocab: Arc<Vocabulary>,
        dim: usize,
        v: Vec<f32>,
        u: Option<Vec<f32>>,
    ) -> Result<Self> {
        let rows = vocab.len();
        if v.len() != rows * dim {
            return Err(Error::data("embedding matrix shape mismatch"));
        }
        if let Some(u) = &u {
            if u.len() != rows * dim {
                return Err(Error::data("output matrix shape mismatch"));
            }
        }
        Ok(EmbeddingModel { vocab, dim, v, u })
    }

    pub(crate) fn into_matrices(self) -> (Vec<f32>, Option<Vec<f32>>) {
        (self.v, self.u)
    }

    pub fn vocab(&self) -> &Arc<Vocabulary> {
        &self.vocab
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Whether the output matrix `U` is present (fresh or persisted with it).
    pub fn has_output_vectors(&self) -> bool {
        self.u.is_some()
    }

    /// The `V` row of a symbol. Panics on an out-of-range id.
    pub fn vector(&self, id: SymbolId) -> &[f32] {
        let i = id.index();
        &self.v[i * self.dim..(i + 1) * self.dim]
    }

    /// The `V` row of a symbol, or an error for ids outside the vocabulary.
    pub fn try_vector(&self, id: SymbolId) -> Result<&[f32]> {
        if id.index() >= self.vocab.len() {
            return Err(Error::data(format!("unknown symbol id {}", id.index())));
        }
        Ok(self.vector(id))
    }

    pub(crate) fn v_data(&self) -> &[f32] {
        &self.v
    }

    pub(crate) fn u_data(&self) -> Option<&[f32]> {
        self.u.as_deref()
    }

    /// All matrix entries finite (no NaN/Inf)?
    pub fn all_finite(&self) -> bool {
        self.v.iter().all(|x| x.is_finite())
            && self.u.iter().flat_map(|u| u.iter()).all(|x| x.is_finite())
    }
}
