//! The candidate ranking feature set.
//!
//! Thirteen features per (mention, candidate) pair, flattened in the
//! [`FEATURE_NAMES`] order: four count-based features, five string
//! similarity features between the entity title and the mention surface,
//! and four embedding features (textual-context and coherence cosines plus
//! the candidate's rank under each score).

use std::collections::{BTreeSet, HashSet};

use crate::corpus::{fold_surface, fold_title, SymbolId, Vocabulary};
use crate::embedding::EmbeddingModel;
use crate::error::Result;
use crate::similarity::cosine_mixed;

use super::dictionary::{Candidate, MentionDictionary};
use super::Document;

/// Flattening order of [`CandidateFeatures::to_vector`]; also the feature
/// names recorded in ranker model files.
pub const FEATURE_NAMES: [&str; 13] = [
    "prior_probability",
    "entity_prior",
    "max_prior_in_doc",
    "num_candidates",
    "edit_distance",
    "title_equals_surface",
    "title_contains_surface",
    "title_startswith_surface",
    "title_endswith_surface",
    "text_context_cosine",
    "coherence_cosine",
    "text_context_rank",
    "coherence_rank",
];

/// The full feature vector for one candidate of one mention.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateFeatures {
    pub prior_probability: f64,
    pub entity_prior: f64,
    pub max_prior_in_doc: f64,
    pub num_candidates: usize,
    pub edit_distance: usize,
    pub title_equals_surface: bool,
    pub title_contains_surface: bool,
    pub title_startswith_surface: bool,
    pub title_endswith_surface: bool,
    pub text_context_cosine: f64,
    pub coherence_cosine: f64,
    /// 1-based rank among the mention's candidates by textual-context score.
    pub text_context_rank: usize,
    /// 1-based rank among the mention's candidates by coherence score.
    pub coherence_rank: usize,
}

impl CandidateFeatures {
    /// Flattens into the [`FEATURE_NAMES`] order; booleans become 0/1.
    pub fn to_vector(&self) -> Vec<f64> {
        vec![
            self.prior_probability,
            self.entity_prior,
            self.max_prior_in_doc,
            self.num_candidates as f64,
            self.edit_distance as f64,
            self.title_equals_surface as u8 as f64,
            self.title_contains_surface as u8 as f64,
            self.title_startswith_surface as u8 as f64,
            self.title_endswith_surface as u8 as f64,
            self.text_context_cosine,
            self.coherence_cosine,
            self.text_context_rank as f64,
            self.coherence_rank as f64,
        ]
    }
}

/// Levenshtein edit distance over Unicode scalar values.
pub fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    if a.is_empty() {
        return b.len();
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut current = vec![0usize; b.len() + 1];
    for (i, &ca) in a.iter().enumerate() {
        current[0] = i + 1;
        for (j, &cb) in b.iter().enumerate() {
            let substitution = prev[j] + usize::from(ca != cb);
            current[j + 1] = substitution.min(prev[j + 1] + 1).min(current[j] + 1);
        }
        std::mem::swap(&mut prev, &mut current);
    }
    prev[b.len()]
}

/// A small bundled English stopword list for the default context filter.
const STOPWORDS: &[&str] = &[
    "a", "about", "above", "after", "again", "against", "all", "am", "an", "and", "any", "are",
    "as", "at", "be", "because", "been", "before", "being", "below", "between", "both", "but",
    "by", "can", "cannot", "could", "did", "do", "does", "doing", "down", "during", "each",
    "few", "for", "from", "further", "had", "has", "have", "having", "he", "her", "here",
    "hers", "herself", "him", "himself", "his", "how", "i", "if", "in", "into", "is", "it",
    "its", "itself", "just", "me", "more", "most", "my", "myself", "no", "nor", "not", "now",
    "of", "off", "on", "once", "only", "or", "other", "our", "ours", "ourselves", "out",
    "over", "own", "same", "she", "should", "so", "some", "such", "than", "that", "the",
    "their", "theirs", "them", "themselves", "then", "there", "these", "they", "this",
    "those", "through", "to", "too", "under", "until", "up", "very", "was", "we", "were",
    "what", "when", "where", "which", "while", "who", "whom", "why", "will", "with", "would",
    "you", "your", "yours", "yourself", "yourselves",
];

/// Pluggable selection of document context words for the textual-context
/// vector. The reference pipeline kept noun words via a POS tagger; here
/// the default keeps everything except a bundled stopword list, and a
/// user-supplied noun lexicon can stand in for the tagger.
#[derive(Debug, Clone)]
pub enum ContextWordFilter {
    /// Keep all in-vocabulary tokens except bundled stopwords.
    Stopwords,
    /// Keep only tokens present in the supplied lexicon.
    NounLexicon(HashSet<String>),
}

impl Default for ContextWordFilter {
    fn default() -> Self {
        ContextWordFilter::Stopwords
    }
}

impl ContextWordFilter {
    pub fn name(&self) -> &'static str {
        match self {
            ContextWordFilter::Stopwords => "stopwords",
            ContextWordFilter::NounLexicon(_) => "noun-lexicon",
        }
    }

    pub fn keeps(&self, token: &str) -> bool {
        match self {
            ContextWordFilter::Stopwords => !STOPWORDS.contains(&token),
            ContextWordFilter::NounLexicon(lexicon) => lexicon.contains(token),
        }
    }
}

/// Shared read-only inputs for candidate generation and feature extraction.
pub struct FeatureExtractor<'a> {
    pub dict: &'a MentionDictionary,
    pub model: &'a EmbeddingModel,
    pub filter: &'a ContextWordFilter,
}

impl FeatureExtractor<'_> {
    pub fn vocab(&self) -> &Vocabulary {
        self.model.vocab()
    }

    /// Candidate lists per mention, in dictionary rank order.
    pub fn candidates(&self, doc: &Document) -> Vec<Vec<Candidate>> {
        doc.mentions
            .iter()
            .map(|m| self.dict.candidates(&m.surface).to_vec())
            .collect()
    }

    /// The mention-specific textual context vector: the average `V` row of
    /// the document's distinct kept context words, excluding words the
    /// mention surface contains. `None` when no context word survives.
    fn text_context_vector(&self, doc: &Document, mention_idx: usize) -> Option<Vec<f64>> {
        let folded_surface = fold_surface(&doc.mentions[mention_idx].surface);
        let vocab = self.vocab();
        let mut ids: BTreeSet<SymbolId> = BTreeSet::new();
        for token in &doc.tokens {
            if !self.filter.keeps(token) || folded_surface.contains(token.as_str()) {
                continue;
            }
            if let Some(id) = vocab.word_id(token) {
                ids.insert(id);
            }
        }
        self.average_rows(ids.into_iter())
    }

    /// The coherence vector: average `V` row of the context entities.
    fn coherence_vector(&self, context_entities: &[SymbolId]) -> Option<Vec<f64>> {
        self.average_rows(context_entities.iter().copied())
    }

    fn average_rows(&self, ids: impl Iterator<Item = SymbolId>) -> Option<Vec<f64>> {
        let mut sum = vec![0.0f64; self.model.dim()];
        let mut n = 0usize;
        for id in ids {
            for (s, &x) in sum.iter_mut().zip(self.model.vector(id)) {
                *s += x as f64;
            }
            n += 1;
        }
        if n == 0 {
            return None;
        }
        for s in &mut sum {
            *s /= n as f64;
        }
        Some(sum)
    }

    /// Computes the full feature set for every candidate of every mention.
    /// `coherence_contexts[i]` holds mention `i`'s context entity ids
    /// (deduplicated, sorted), e.g. from [`super::contexts_from_assignments`].
    pub fn features(
        &self,
        doc: &Document,
        candidates: &[Vec<Candidate>],
        coherence_contexts: &[Vec<SymbolId>],
    ) -> Result<Vec<Vec<CandidateFeatures>>> {
        let vocab = self.vocab();

        // max P(e|m') over the document's mentions m' that have e as a
        // candidate.
        let mut doc_max_prior: std::collections::HashMap<SymbolId, f64> =
            std::collections::HashMap::new();
        for (mention, cands) in doc.mentions.iter().zip(candidates) {
            for c in cands {
                let p = self.dict.prior_probability(&mention.surface, c.entity);
                let slot = doc_max_prior.entry(c.entity).or_insert(0.0);
                if p > *slot {
                    *slot = p;
                }
            }
        }

        let mut out = Vec::with_capacity(doc.mentions.len());
        for (i, (mention, cands)) in doc.mentions.iter().zip(candidates).enumerate() {
            let surface = fold_surface(&mention.surface);
            let text_vector = self.text_context_vector(doc, i);
            let coherence_vector = self.coherence_vector(&coherence_contexts[i]);

            let mut features: Vec<CandidateFeatures> = Vec::with_capacity(cands.len());
            for c in cands {
                let row = self.model.try_vector(c.entity)?;
                let title = fold_title(vocab.symbol(c.entity));
                features.push(CandidateFeatures {
                    prior_probability: self.dict.prior_probability(&mention.surface, c.entity),
                    entity_prior: self.dict.entity_prior(c.entity),
                    max_prior_in_doc: doc_max_prior.get(&c.entity).copied().unwrap_or(0.0),
                    num_candidates: cands.len(),
                    edit_distance: levenshtein(&title, &surface),
                    title_equals_surface: title == surface,
                    title_contains_surface: title.contains(&surface),
                    title_startswith_surface: title.starts_with(&surface),
                    title_endswith_surface: title.ends_with(&surface),
                    text_context_cosine: text_vector
                        .as_deref()
                        .map_or(0.0, |v| cosine_mixed(v, row)),
                    coherence_cosine: coherence_vector
                        .as_deref()
                        .map_or(0.0, |v| cosine_mixed(v, row)),
                    text_context_rank: 0,
                    coherence_rank: 0,
                });
            }
            assign_ranks(&mut features, cands, vocab);
            out.push(features);
        }
        Ok(out)
    }
}

/// Fills the two rank features: 1-based positions under each score,
/// descending, ties broken by ascending entity symbol.
fn assign_ranks(features: &mut [CandidateFeatures], cands: &[Candidate], vocab: &Vocabulary) {
    let ranked = |score: &dyn Fn(&CandidateFeatures) -> f64| {
        let mut order: Vec<usize> = (0..features.len()).collect();
        order.sort_by(|&a, &b| {
            score(&features[b])
                .total_cmp(&score(&features[a]))
                .then_with(|| vocab.symbol(cands[a].entity).cmp(vocab.symbol(cands[b].entity)))
        });
        let mut ranks = vec![0usize; features.len()];
        for (rank, idx) in order.into_iter().enumerate() {
            ranks[idx] = rank + 1;
        }
        ranks
    };
    let text_ranks = ranked(&|f: &CandidateFeatures| f.text_context_cosine);
    let coherence_ranks = ranked(&|f: &CandidateFeatures| f.coherence_cosine);
    for (f, (t, c)) in features
        .iter_mut()
        .zip(text_ranks.into_iter().zip(coherence_ranks))
    {
        f.text_context_rank = t;
        f.coherence_rank = c;
    }
}
