//! Negative-sampling distributions.
//!
//! Word negatives follow the unigram distribution raised to the 3/4 power,
//! `U(w)^{3/4} / Z`; entity negatives are uniform over all KB entities.

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::{SymbolId, SymbolKind, Vocabulary};
use crate::error::{Error, Result};

/// Exponent applied to word frequencies for the noise distribution.
pub const NOISE_EXPONENT: f64 = 0.75;

const MAX_RESAMPLE_ATTEMPTS: usize = 100;

enum Table {
    /// Cumulative table over `count^{3/4}` word weights.
    Weighted(WeightedIndex<f64>),
    /// Uniform over `len` ids starting at `base`.
    Uniform { base: u32, len: u32 },
}

/// Draws negative ids for one kind of symbol, excluding the positive id by
/// resampling.
pub struct NegativeSampler {
    kind: SymbolKind,
    table: Table,
    rng: ChaCha8Rng,
}

impl NegativeSampler {
    /// Word sampler over `U(w)^{3/4} / Z`.
    pub fn words(vocab: &Vocabulary, seed: u64) -> Result<Self> {
        if vocab.word_count() == 0 {
            return Err(Error::data("cannot sample word negatives: no words in vocabulary"));
        }
        let weights: Vec<f64> = vocab
            .word_counts()
            .map(|c| (c as f64).powf(NOISE_EXPONENT))
            .collect();
        let table = WeightedIndex::new(&weights)
            .map_err(|e| Error::data(format!("invalid word sampling weights: {e}")))?;
        Ok(NegativeSampler {
            kind: SymbolKind::Word,
            table: Table::Weighted(table),
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    /// Uniform sampler over all KB entities.
    pub fn entities(vocab: &Vocabulary, seed: u64) -> Result<Self> {
        if vocab.entity_count() == 0 {
            return Err(Error::data(
                "cannot sample entity negatives: no entities in vocabulary",
            ));
        }
        Ok(NegativeSampler {
            kind: SymbolKind::Entity,
            table: Table::Uniform {
                base: vocab.word_count() as u32,
                len: vocab.entity_count() as u32,
            },
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    pub fn kind(&self) -> SymbolKind {
        self.kind
    }

    #[inline]
    fn sample_one(&mut self) -> SymbolId {
        match &self.table {
            Table::Weighted(dist) => SymbolId(dist.sample(&mut self.rng) as u32),
            Table::Uniform { base, len } => SymbolId(base + self.rng.gen_range(0..*len)),
        }
    }

    /// Draws `g` ids into `out`, none equal to `exclude`. Collisions with
    /// `exclude` are resampled; a degenerate support that cannot avoid it
    /// is an error.
    pub fn draw_into(
        &mut self,
        exclude: SymbolId,
        g: usize,
        out: &mut Vec<SymbolId>,
    ) -> Result<()> {
        out.clear();
        for _ in 0..g {
            let mut attempts = 0;
            loop {
                let id = self.sample_one();
                if id != exclude {
                    out.push(id);
                    break;
                }
                attempts += 1;
                if attempts >= MAX_RESAMPLE_ATTEMPTS {
                    return Err(Error::data("degenerate negative support"));
                }
            }
        }
        Ok(())
    }

    pub fn draw(&mut self, exclude: SymbolId, g: usize) -> Result<Vec<SymbolId>> {
        let mut out = Vec::with_capacity(g);
        self.draw_into(exclude, g, &mut out)?;
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::testutil::article;
    use crate::corpus::Corpus;

    fn vocab_with_counts(counts: &[(&str, usize)]) -> Vocabulary {
        let text = counts
            .iter()
            .flat_map(|&(w, c)| std::iter::repeat(w).take(c))
            .collect::<Vec<_>>()
            .join(" ");
        let corpus = Corpus::from_pages(vec![article("Page", &text)]).unwrap();
        Vocabulary::build(&corpus, 1).unwrap()
    }

    #[test]
    fn zero_draws_give_empty_list() {
        let vocab = vocab_with_counts(&[("a", 3), ("b", 1)]);
        let mut sampler = NegativeSampler::words(&vocab, 7).unwrap();
        assert_eq!(sampler.draw(vocab.word_id("a").unwrap(), 0).unwrap(), vec![]);
    }

    #[test]
    fn excluded_id_never_drawn() {
        let vocab = vocab_with_counts(&[("a", 5), ("b", 4), ("c", 3)]);
        let mut sampler = NegativeSampler::words(&vocab, 7).unwrap();
        let a = vocab.word_id("a").unwrap();
        for _ in 0..200 {
            for id in sampler.draw(a, 5).unwrap() {
                assert_ne!(id, a);
            }
        }
    }

    #[test]
    fn single_symbol_support_is_degenerate() {
        let vocab = vocab_with_counts(&[("only", 2)]);
        let mut sampler = NegativeSampler::words(&vocab, 7).unwrap();
        let only = vocab.word_id("only").unwrap();
        let err = sampler.draw(only, 1).unwrap_err();
        assert!(err.to_string().contains("degenerate negative support"));
    }

    #[test]
    fn word_frequencies_follow_three_quarter_power() {
        // Counts 8 and 1: expected ratio 8^0.75 / 1^0.75 = 4.7568...
        let vocab = vocab_with_counts(&[("a", 8), ("b", 1)]);
        let mut sampler = NegativeSampler::words(&vocab, 42).unwrap();
        let a = vocab.word_id("a").unwrap();
        let exclude = SymbolId(u32::MAX); // never collides
        let draws = 200_000;
        let mut hits_a = 0usize;
        let mut buf = Vec::new();
        for _ in 0..draws {
            sampler.draw_into(exclude, 1, &mut buf).unwrap();
            if buf[0] == a {
                hits_a += 1;
            }
        }
        let ratio = hits_a as f64 / (draws - hits_a) as f64;
        let expected = 8f64.powf(0.75);
        assert!(
            (ratio - expected).abs() / expected < 0.02,
            "ratio {ratio} vs expected {expected}"
        );
    }

    #[test]
    fn entity_sampler_is_uniform_and_in_range() {
        let corpus = Corpus::from_pages(vec![
            article("E1", "w [[E2]] [[E3]] [[E4]]"),
            article("E2", "w"),
            article("E3", "w"),
            article("E4", "w"),
        ])
        .unwrap();
        let vocab = Vocabulary::build(&corpus, 1).unwrap();
        let mut sampler = NegativeSampler::entities(&vocab, 3).unwrap();
        let exclude = SymbolId(u32::MAX);
        let mut counts = std::collections::HashMap::new();
        let mut buf = Vec::new();
        for _ in 0..40_000 {
            sampler.draw_into(exclude, 1, &mut buf).unwrap();
            assert_eq!(vocab.kind(buf[0]), SymbolKind::Entity);
            *counts.entry(buf[0]).or_insert(0usize) += 1;
        }
        assert_eq!(counts.len(), 4);
        for &c in counts.values() {
            let freq = c as f64 / 40_000.0;
            assert!((freq - 0.25).abs() < 0.01, "freq {freq}");
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let vocab = vocab_with_counts(&[("a", 5), ("b", 3), ("c", 2)]);
        let exclude = vocab.word_id("c").unwrap();
        let mut s1 = NegativeSampler::words(&vocab, 99).unwrap();
        let mut s2 = NegativeSampler::words(&vocab, 99).unwrap();
        assert_eq!(s1.draw(exclude, 50).unwrap(), s2.draw(exclude, 50).unwrap());
    }
}
