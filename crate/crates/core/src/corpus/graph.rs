//! The knowledge-base link graph: incoming-link sets per entity.

use super::{Corpus, SymbolId, Vocabulary};

/// Incoming-link sets `C_e`: for every anchor on the page of entity `p`
/// pointing at entity `e`, `p` is in `C_e`. Self-links are excluded and
/// duplicates collapsed; sets are sorted by id.
#[derive(Debug, Clone)]
pub struct LinkGraph {
    incoming: Vec<Vec<SymbolId>>,
    word_count: usize,
}

impl LinkGraph {
    pub fn build(corpus: &Corpus, vocab: &Vocabulary) -> Self {
        let mut incoming = vec![Vec::new(); vocab.entity_count()];
        for page in corpus.articles() {
            let Some(source) = vocab.entity_id(&page.id) else {
                continue;
            };
            for anchor in &page.anchors {
                let Some(target) = corpus.resolve_target(&anchor.target) else {
                    continue;
                };
                let Some(target_id) = vocab.entity_id(target) else {
                    continue;
                };
                if target_id == source {
                    continue;
                }
                let offset = vocab.entity_offset(target_id).expect("entity id");
                incoming[offset].push(source);
            }
        }
        for set in &mut incoming {
            set.sort_unstable();
            set.dedup();
        }
        LinkGraph {
            incoming,
            word_count: vocab.word_count(),
        }
    }

    /// Number of entities in the KB (`|E|`), including unlinked ones.
    pub fn entity_count(&self) -> usize {
        self.incoming.len()
    }

    /// Word count of the vocabulary this graph was built against.
    pub fn word_count(&self) -> usize {
        self.word_count
    }

    /// The sorted incoming-link set `C_e`. Entities absent from the map and
    /// non-entity ids get the empty set.
    pub fn incoming(&self, entity: SymbolId) -> &[SymbolId] {
        match entity.index().checked_sub(self.word_count) {
            Some(offset) if offset < self.incoming.len() => &self.incoming[offset],
            _ => &[],
        }
    }

    /// True when `id` falls in this graph's entity id range.
    pub fn is_entity(&self, id: SymbolId) -> bool {
        let i = id.index();
        i >= self.word_count && i < self.word_count + self.incoming.len()
    }
}

#[cfg(test)]
mod tests {
    use super::super::testutil::article;
    use super::*;
    use crate::corpus::Corpus;
    use std::collections::{HashMap, HashSet};

    #[test]
    fn duplicate_links_collapse() {
        let corpus = Corpus::from_pages(vec![
            article("A", "x [[B]] y [[B|again]]"),
            article("B", "z"),
        ])
        .unwrap();
        let vocab = Vocabulary::build(&corpus, 1).unwrap();
        let graph = LinkGraph::build(&corpus, &vocab);
        let b = vocab.entity_id("B").unwrap();
        assert_eq!(graph.incoming(b), &[vocab.entity_id("A").unwrap()]);
    }

    #[test]
    fn self_links_are_excluded() {
        let corpus = Corpus::from_pages(vec![article("A", "see [[A]] itself")]).unwrap();
        let vocab = Vocabulary::build(&corpus, 1).unwrap();
        let graph = LinkGraph::build(&corpus, &vocab);
        let a = vocab.entity_id("A").unwrap();
        assert!(graph.incoming(a).is_empty());
    }

    #[test]
    fn matches_brute_force_adjacency_transpose() {
        let corpus = Corpus::from_pages(vec![
            article("A", "[[B]] [[C]] [[B]]"),
            article("B", "[[C]] [[A]]"),
            article("C", "[[A]]"),
            article("D", "[[A]] [[E]] [[D]]"),
            article("E", "[[B]] [[C]] [[D]]"),
        ])
        .unwrap();
        let vocab = Vocabulary::build(&corpus, 1).unwrap();
        let graph = LinkGraph::build(&corpus, &vocab);

        // Brute force: enumerate (source, target) pairs, transpose.
        let mut expected: HashMap<SymbolId, HashSet<SymbolId>> = HashMap::new();
        for page in corpus.articles() {
            let source = vocab.entity_id(&page.id).unwrap();
            for anchor in &page.anchors {
                let target = vocab.entity_id(&anchor.target).unwrap();
                if target != source {
                    expected.entry(target).or_default().insert(source);
                }
            }
        }
        for entity in vocab.entity_ids() {
            let got: HashSet<SymbolId> = graph.incoming(entity).iter().copied().collect();
            assert_eq!(got, expected.remove(&entity).unwrap_or_default());
            // Sets are sorted and never contain the entity itself.
            assert!(graph.incoming(entity).windows(2).all(|w| w[0] < w[1]));
            assert!(!graph.incoming(entity).contains(&entity));
        }
    }
}
