//! Anchor count statistics backing the entity prior and prior probability.

use std::collections::HashMap;

use super::{fold_surface, Corpus, SymbolId, Vocabulary};

/// Exact anchor counts over the whole corpus.
///
/// `per_pair` holds `|A_{e,m}|` keyed by (case-folded surface, entity);
/// the marginals `per_surface` (`|A_{*,m}|`), `per_entity` (`|A_{e,*}|`),
/// and `total` (`|A_{*,*}|`) are maintained alongside and always satisfy
/// the marginalization identities.
#[derive(Debug, Clone, Default)]
pub struct AnchorStatistics {
    per_pair: HashMap<(String, SymbolId), u64>,
    per_surface: HashMap<String, u64>,
    per_entity: HashMap<SymbolId, u64>,
    total: u64,
}

impl AnchorStatistics {
    /// Counts anchors whose target resolves to a vocabulary entity. Returns
    /// the statistics and the number of anchors dropped because their target
    /// was unresolvable or absent from the vocabulary.
    pub fn build(corpus: &Corpus, vocab: &Vocabulary) -> (Self, u64) {
        let mut stats = AnchorStatistics::default();
        let mut dropped = 0u64;
        for page in corpus.articles() {
            for anchor in &page.anchors {
                let entity = corpus
                    .resolve_target(&anchor.target)
                    .and_then(|t| vocab.entity_id(t));
                let Some(entity) = entity else {
                    dropped += 1;
                    continue;
                };
                stats.record(fold_surface(&anchor.surface), entity, 1);
            }
        }
        (stats, dropped)
    }

    pub(crate) fn record(&mut self, surface: String, entity: SymbolId, count: u64) {
        *self.per_surface.entry(surface.clone()).or_insert(0) += count;
        *self.per_pair.entry((surface, entity)).or_insert(0) += count;
        *self.per_entity.entry(entity).or_insert(0) += count;
        self.total += count;
    }

    /// `|A_{e,m}|` for a case-folded surface.
    pub fn pair_count(&self, surface: &str, entity: SymbolId) -> u64 {
        self.per_pair
            .get(&(surface.to_string(), entity))
            .copied()
            .unwrap_or(0)
    }

    /// `|A_{*,m}|` for a case-folded surface.
    pub fn surface_count(&self, surface: &str) -> u64 {
        self.per_surface.get(surface).copied().unwrap_or(0)
    }

    /// `|A_{e,*}|`.
    pub fn entity_count(&self, entity: SymbolId) -> u64 {
        self.per_entity.get(&entity).copied().unwrap_or(0)
    }

    /// `|A_{*,*}|`.
    pub fn total(&self) -> u64 {
        self.total
    }

    /// Prior probability `P(e|m) = |A_{e,m}| / |A_{*,m}|`; 0 when the
    /// surface was never seen as an anchor.
    pub fn prior_probability(&self, surface: &str, entity: SymbolId) -> f64 {
        match self.surface_count(surface) {
            0 => 0.0,
            n => self.pair_count(surface, entity) as f64 / n as f64,
        }
    }

    /// Entity prior `P(e) = |A_{e,*}| / |A_{*,*}|`; 0 on an anchor-free corpus.
    pub fn entity_prior(&self, entity: SymbolId) -> f64 {
        match self.total {
            0 => 0.0,
            n => self.entity_count(entity) as f64 / n as f64,
        }
    }

    /// All (surface, entity, count) triples in unspecified order.
    pub fn pairs(&self) -> impl Iterator<Item = (&str, SymbolId, u64)> {
        self.per_pair
            .iter()
            .map(|((surface, entity), &count)| (surface.as_str(), *entity, count))
    }

    /// Checks the three marginalization identities exactly.
    pub fn marginals_consistent(&self) -> bool {
        let mut by_surface: HashMap<&str, u64> = HashMap::new();
        let mut by_entity: HashMap<SymbolId, u64> = HashMap::new();
        let mut sum = 0u64;
        for ((surface, entity), &count) in &self.per_pair {
            *by_surface.entry(surface.as_str()).or_insert(0) += count;
            *by_entity.entry(*entity).or_insert(0) += count;
            sum += count;
        }
        sum == self.total
            && by_surface.len() == self.per_surface.len()
            && by_entity.len() == self.per_entity.len()
            && by_surface
                .iter()
                .all(|(s, &c)| self.surface_count(s) == c)
            && by_entity.iter().all(|(e, &c)| self.entity_count(*e) == c)
    }
}

#[cfg(test)]
mod tests {
    use super::super::testutil::article;
    use super::*;
    use crate::corpus::Corpus;

    #[test]
    fn single_anchor_gives_unit_prior() {
        let corpus = Corpus::from_pages(vec![article("Doc", "visit [[Paris|paris]] today")])
            .unwrap();
        let vocab = Vocabulary::build(&corpus, 1).unwrap();
        let (stats, dropped) = AnchorStatistics::build(&corpus, &vocab);
        assert_eq!(dropped, 0);
        let paris = vocab.entity_id("Paris").unwrap();
        assert_eq!(stats.prior_probability("paris", paris), 1.0);
        assert_eq!(stats.entity_prior(paris), 1.0);
    }

    #[test]
    fn hand_counted_fixture() {
        let corpus = Corpus::from_pages(vec![
            article("P1", "[[NYC|ny]] x [[NYC|ny]]"),
            article("P2", "[[NYC|NY]] y [[NY_State|ny]]"),
        ])
        .unwrap();
        let vocab = Vocabulary::build(&corpus, 1).unwrap();
        let (stats, _) = AnchorStatistics::build(&corpus, &vocab);
        let nyc = vocab.entity_id("NYC").unwrap();
        let state = vocab.entity_id("NY_State").unwrap();
        // Case folding merges "NY" into "ny".
        assert_eq!(stats.pair_count("ny", nyc), 3);
        assert_eq!(stats.pair_count("ny", state), 1);
        assert_eq!(stats.surface_count("ny"), 4);
        assert_eq!(stats.entity_count(nyc), 3);
        assert_eq!(stats.total(), 4);
        assert_eq!(stats.prior_probability("ny", nyc), 0.75);
        assert!(stats.marginals_consistent());
    }

    #[test]
    fn unknown_targets_are_dropped_and_counted() {
        let mut corpus = Corpus::from_pages(vec![article("A", "[[B]] [[C]]")]).unwrap();
        // Build the vocabulary against a corpus that lacks C, simulating an
        // anchor to a vocabulary-absent entity.
        let reduced = Corpus::from_pages(vec![article("A", "[[B]]")]).unwrap();
        let vocab = Vocabulary::build(&reduced, 1).unwrap();
        let (stats, dropped) = AnchorStatistics::build(&mut corpus, &vocab);
        assert_eq!(dropped, 1);
        assert_eq!(stats.total(), 1);
    }
}
