//! Anchor occurrences: a referent entity paired with its context words.

use super::{Corpus, Page, SymbolId, Vocabulary};

/// One anchor occurrence `(e_i, Q)`: the referent entity and up to `c`
/// in-vocabulary words on each side of the anchor span, in textual order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnchorOccurrence {
    pub entity: SymbolId,
    pub context_words: Vec<SymbolId>,
}

/// Extracts one occurrence per anchor whose target resolves to a vocabulary
/// entity. Context windows hold up to `window` in-vocabulary words per side,
/// truncated at page boundaries; out-of-vocabulary tokens are skipped
/// without consuming window slots, and the anchor's own surface tokens are
/// never part of `Q`. Returns the occurrences and the number of dropped
/// anchors (unresolvable or vocabulary-absent targets).
pub fn extract_anchor_occurrences(
    page: &Page,
    corpus: &Corpus,
    vocab: &Vocabulary,
    window: usize,
) -> (Vec<AnchorOccurrence>, u64) {
    let word_ids: Vec<Option<SymbolId>> =
        page.tokens.iter().map(|t| vocab.word_id(t)).collect();
    let mut occurrences = Vec::with_capacity(page.anchors.len());
    let mut dropped = 0u64;

    for anchor in &page.anchors {
        let entity = corpus
            .resolve_target(&anchor.target)
            .and_then(|t| vocab.entity_id(t));
        let Some(entity) = entity else {
            dropped += 1;
            continue;
        };

        let mut context_words = Vec::new();
        // Previous `window` in-vocabulary words, collected nearest-first
        // then reversed into textual order.
        let mut taken = 0;
        for i in (0..anchor.span.start).rev() {
            if taken == window {
                break;
            }
            if let Some(id) = word_ids[i] {
                context_words.push(id);
                taken += 1;
            }
        }
        context_words.reverse();
        // Next `window` in-vocabulary words.
        let mut taken = 0;
        for i in anchor.span.end..word_ids.len() {
            if taken == window {
                break;
            }
            if let Some(id) = word_ids[i] {
                context_words.push(id);
                taken += 1;
            }
        }
        occurrences.push(AnchorOccurrence {
            entity,
            context_words,
        });
    }
    (occurrences, dropped)
}

#[cfg(test)]
mod tests {
    use super::super::testutil::article;
    use super::*;
    use crate::corpus::{Corpus, Vocabulary};

    fn ids(vocab: &Vocabulary, words: &[&str]) -> Vec<SymbolId> {
        words.iter().map(|w| vocab.word_id(w).unwrap()).collect()
    }

    #[test]
    fn page_start_truncates_to_following_words() {
        let corpus = Corpus::from_pages(vec![
            article("P", "[[X|x-surf]] c d e"),
            article("X", "c d e c d e c d e x-surf"),
        ])
        .unwrap();
        let vocab = Vocabulary::build(&corpus, 1).unwrap();
        let page = &corpus.pages[0];
        let (occs, dropped) = extract_anchor_occurrences(page, &corpus, &vocab, 10);
        assert_eq!(dropped, 0);
        assert_eq!(occs.len(), 1);
        assert_eq!(occs[0].context_words, ids(&vocab, &["c", "d", "e"]));
    }

    #[test]
    fn window_spans_both_sides() {
        let corpus = Corpus::from_pages(vec![article("P", "a b [[X]] c d"), article("X", "a b c d")])
            .unwrap();
        let vocab = Vocabulary::build(&corpus, 1).unwrap();
        let (occs, _) = extract_anchor_occurrences(&corpus.pages[0], &corpus, &vocab, 2);
        // The anchor surface token "x" is out of vocabulary for words? It is
        // a word ("x" appears once); ensure Q is the enumerated window.
        assert_eq!(occs[0].context_words, ids(&vocab, &["a", "b", "c", "d"]));
    }

    #[test]
    fn oov_tokens_do_not_consume_slots() {
        // "rare" appears once and min_count=2 prunes it; the window must
        // reach past it.
        let corpus = Corpus::from_pages(vec![
            article("P", "aa aa bb rare [[X|xx]] rare2 cc"),
            article("Q", "aa bb cc xx [[X|xx]]"),
        ])
        .unwrap();
        let vocab = Vocabulary::build(&corpus, 2).unwrap();
        assert!(vocab.word_id("rare").is_none());
        let (occs, _) = extract_anchor_occurrences(&corpus.pages[0], &corpus, &vocab, 2);
        assert_eq!(occs[0].context_words, ids(&vocab, &["aa", "bb", "cc"]));
    }

    #[test]
    fn anchor_surface_tokens_are_excluded() {
        let corpus = Corpus::from_pages(vec![
            article("P", "a [[X|two tokens]] b"),
            article("X", "a b two tokens two tokens"),
        ])
        .unwrap();
        let vocab = Vocabulary::build(&corpus, 1).unwrap();
        let (occs, _) = extract_anchor_occurrences(&corpus.pages[0], &corpus, &vocab, 10);
        let q = &occs[0].context_words;
        assert_eq!(q, &ids(&vocab, &["a", "b"]));
        assert!(!q.contains(&vocab.word_id("two").unwrap()));
        assert!(!q.contains(&vocab.word_id("tokens").unwrap()));
        assert!(q.len() <= 2 * 10);
    }

    #[test]
    fn anchors_to_unknown_entities_are_dropped() {
        let corpus = Corpus::from_pages(vec![article("P", "a [[Gone]] b")]).unwrap();
        let reduced = Corpus::from_pages(vec![article("P", "a b")]).unwrap();
        let vocab = Vocabulary::build(&reduced, 1).unwrap();
        let (occs, dropped) = extract_anchor_occurrences(&corpus.pages[0], &corpus, &vocab, 5);
        assert!(occs.is_empty());
        assert_eq!(dropped, 1);
    }
}
