//! The two-step disambiguation procedure and micro/macro evaluation.

use serde::Serialize;

use crate::corpus::{SymbolId, Vocabulary};
use crate::error::{Error, Result};
use crate::gbrt::{GbrtModel, TrainInstance};

use super::dictionary::Candidate;
use super::features::FeatureExtractor;
use super::Document;

/// A mention is unambiguous when one candidate's prior probability exceeds
/// this threshold.
pub const UNAMBIGUOUS_PRIOR_THRESHOLD: f64 = 0.95;

/// Per-mention outcome: candidates in dictionary order, their scores and
/// feature vectors, the chosen index, and which step produced it.
#[derive(Debug, Clone)]
pub struct MentionResult {
    pub candidates: Vec<SymbolId>,
    pub scores: Vec<f64>,
    pub features: Vec<Vec<f64>>,
    /// Index into `candidates`; `None` for an empty candidate list.
    pub chosen: Option<usize>,
    pub step: u8,
}

impl MentionResult {
    pub fn chosen_entity(&self) -> Option<SymbolId> {
        self.chosen.map(|i| self.candidates[i])
    }
}

/// All mention outcomes for one document.
#[derive(Debug, Clone)]
pub struct DisambiguationResult {
    pub mentions: Vec<MentionResult>,
}

/// Per-mention coherence contexts from per-mention entity assignments:
/// mention `i`'s context is every *other* mention's assigned entity,
/// deduplicated and sorted. Using only the other mentions keeps a
/// mention's own (possibly correct) assignment from leaking into its
/// coherence score, and makes step 2 a fixed point of step 1.
pub fn contexts_from_assignments(assignments: &[Option<SymbolId>]) -> Vec<Vec<SymbolId>> {
    (0..assignments.len())
        .map(|i| {
            let mut ids: Vec<SymbolId> = assignments
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .filter_map(|(_, a)| *a)
                .collect();
            ids.sort_unstable();
            ids.dedup();
            ids
        })
        .collect()
}

/// Per-mention unambiguous entity: the candidate with `P(e|m)` above the
/// threshold, if any. At most one candidate can qualify.
fn unambiguous_assignments(
    fx: &FeatureExtractor<'_>,
    doc: &Document,
    candidates: &[Vec<Candidate>],
) -> Vec<Option<SymbolId>> {
    doc.mentions
        .iter()
        .zip(candidates)
        .map(|(mention, cands)| {
            cands
                .iter()
                .find(|c| {
                    fx.dict.prior_probability(&mention.surface, c.entity)
                        > UNAMBIGUOUS_PRIOR_THRESHOLD
                })
                .map(|c| c.entity)
        })
        .collect()
}

fn score_mentions(
    ranker: &GbrtModel,
    features: &[Vec<Vec<f64>>],
) -> Result<Vec<Vec<f64>>> {
    features
        .iter()
        .map(|mention| {
            mention
                .iter()
                .map(|f| ranker.predict_score(f))
                .collect::<Result<Vec<f64>>>()
        })
        .collect()
}

/// Argmax with the tie chain: score descending, then `P(e|m)` descending,
/// then entity symbol ascending.
fn choose(
    scores: &[f64],
    cands: &[Candidate],
    surface: &str,
    fx: &FeatureExtractor<'_>,
) -> Option<usize> {
    let vocab = fx.vocab();
    (0..cands.len()).min_by(|&a, &b| {
        scores[b]
            .total_cmp(&scores[a])
            .then_with(|| {
                fx.dict
                    .prior_probability(surface, cands[b].entity)
                    .total_cmp(&fx.dict.prior_probability(surface, cands[a].entity))
            })
            .then_with(|| vocab.symbol(cands[a].entity).cmp(vocab.symbol(cands[b].entity)))
    })
}

fn assemble(
    candidates: &[Vec<Candidate>],
    features: Vec<Vec<super::CandidateFeatures>>,
    scores: Vec<Vec<f64>>,
    doc: &Document,
    fx: &FeatureExtractor<'_>,
    step: u8,
) -> DisambiguationResult {
    let mentions = candidates
        .iter()
        .zip(features)
        .zip(scores)
        .zip(&doc.mentions)
        .map(|(((cands, feats), scores), mention)| {
            let chosen = choose(&scores, cands, &mention.surface, fx);
            MentionResult {
                candidates: cands.iter().map(|c| c.entity).collect(),
                features: feats.iter().map(|f| f.to_vector()).collect(),
                scores,
                chosen,
                step,
            }
        })
        .collect();
    DisambiguationResult { mentions }
}

/// Runs the two-step procedure on one document.
///
/// Step 1 scores every candidate with coherence contexts built from the
/// unambiguous mentions. Step 2, when a second ranker is given, rebuilds
/// the coherence contexts from the step-1 choices of the other mentions
/// and rescores. Without a second ranker the step-1 result is returned.
pub fn disambiguate_document(
    doc: &Document,
    fx: &FeatureExtractor<'_>,
    ranker_step1: &GbrtModel,
    ranker_step2: Option<&GbrtModel>,
) -> Result<DisambiguationResult> {
    let candidates = fx.candidates(doc);
    let unambiguous = unambiguous_assignments(fx, doc, &candidates);
    let contexts = contexts_from_assignments(&unambiguous);
    let features = fx.features(doc, &candidates, &contexts)?;
    let scores = score_mentions(ranker_step1, &feature_vectors(&features))?;
    let step1 = assemble(&candidates, features, scores, doc, fx, 1);

    let Some(ranker_step2) = ranker_step2 else {
        return Ok(step1);
    };

    let assignments: Vec<Option<SymbolId>> =
        step1.mentions.iter().map(|m| m.chosen_entity()).collect();
    let contexts = contexts_from_assignments(&assignments);
    let features = fx.features(doc, &candidates, &contexts)?;
    let scores = score_mentions(ranker_step2, &feature_vectors(&features))?;
    Ok(assemble(&candidates, features, scores, doc, fx, 2))
}

fn feature_vectors(features: &[Vec<super::CandidateFeatures>]) -> Vec<Vec<Vec<f64>>> {
    features
        .iter()
        .map(|mention| mention.iter().map(|f| f.to_vector()).collect())
        .collect()
}

/// Disambiguates a batch of documents; with the `parallel` feature the
/// documents are processed concurrently (all inputs are read-only).
pub fn disambiguate_documents(
    docs: &[Document],
    fx: &FeatureExtractor<'_>,
    ranker_step1: &GbrtModel,
    ranker_step2: Option<&GbrtModel>,
) -> Result<Vec<DisambiguationResult>> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        docs.par_iter()
            .map(|doc| disambiguate_document(doc, fx, ranker_step1, ranker_step2))
            .collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        docs.iter()
            .map(|doc| disambiguate_document(doc, fx, ranker_step1, ranker_step2))
            .collect()
    }
}

/// One labeled training row for the ranker.
#[derive(Debug, Clone)]
pub struct LabeledInstance {
    pub doc_index: usize,
    pub mention_index: usize,
    pub entity: SymbolId,
    pub label: bool,
    pub features: Vec<f64>,
}

impl LabeledInstance {
    pub fn to_train_instance(&self) -> TrainInstance {
        TrainInstance {
            features: self.features.clone(),
            label: self.label,
        }
    }
}

/// Extracts labeled ranker training instances from gold-annotated documents.
///
/// With `assignments == None` coherence contexts come from unambiguous
/// mentions (step-1 training); otherwise from the supplied per-document
/// assignments, e.g. step-1 predictions (step-2 training). Mentions
/// without gold labels are skipped.
pub fn training_instances(
    docs: &[Document],
    fx: &FeatureExtractor<'_>,
    assignments: Option<&[Vec<Option<SymbolId>>]>,
) -> Result<Vec<LabeledInstance>> {
    if let Some(a) = assignments {
        if a.len() != docs.len() {
            return Err(Error::data("assignments and documents are misaligned"));
        }
    }
    let vocab = fx.vocab();
    let mut out = Vec::new();
    for (doc_index, doc) in docs.iter().enumerate() {
        let candidates = fx.candidates(doc);
        let contexts = match assignments {
            Some(a) => contexts_from_assignments(&a[doc_index]),
            None => contexts_from_assignments(&unambiguous_assignments(fx, doc, &candidates)),
        };
        let features = fx.features(doc, &candidates, &contexts)?;
        for (mention_index, (mention, (cands, feats))) in doc
            .mentions
            .iter()
            .zip(candidates.iter().zip(features))
            .enumerate()
        {
            let Some(gold) = mention.gold.as_deref().and_then(|g| vocab.entity_id(g)) else {
                continue;
            };
            for (c, f) in cands.iter().zip(feats) {
                out.push(LabeledInstance {
                    doc_index,
                    mention_index,
                    entity: c.entity,
                    label: c.entity == gold,
                    features: f.to_vector(),
                });
            }
        }
    }
    Ok(out)
}

/// A wrong prediction, recorded for error analysis.
#[derive(Debug, Clone, Serialize)]
pub struct ErrorRecord {
    pub doc_id: String,
    pub surface: String,
    pub gold: String,
    pub predicted: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub predicted_features: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gold_features: Option<Vec<f64>>,
}

/// Micro/macro accuracy plus the bookkeeping counts and error records.
#[derive(Debug, Clone, Serialize)]
pub struct NedEvaluation {
    /// Correct mentions over evaluated mentions.
    pub micro_accuracy: f64,
    /// Mean per-document accuracy over documents with evaluated mentions.
    pub macro_accuracy: f64,
    pub evaluated_mentions: usize,
    pub correct_mentions: usize,
    pub documents_evaluated: usize,
    /// Gold-labeled mentions with an empty candidate list (excluded from
    /// the accuracy denominators).
    pub mentions_without_candidates: usize,
    /// Mentions with no gold label.
    pub mentions_without_gold: usize,
    /// Mentions whose gold entity is not in the vocabulary.
    pub gold_outside_kb: usize,
    pub errors: Vec<ErrorRecord>,
}

/// Evaluates predictions against gold labels. A mention is evaluated when
/// it has a gold label, the gold entity exists in the vocabulary, and its
/// candidate list is non-empty.
pub fn evaluate_ned(
    docs: &[Document],
    results: &[DisambiguationResult],
    vocab: &Vocabulary,
) -> Result<NedEvaluation> {
    if docs.is_empty() {
        return Err(Error::data("empty dataset"));
    }
    if docs.len() != results.len() {
        return Err(Error::data("documents and results are misaligned"));
    }

    let mut evaluated = 0usize;
    let mut correct = 0usize;
    let mut documents_evaluated = 0usize;
    let mut macro_sum = 0.0f64;
    let mut no_candidates = 0usize;
    let mut no_gold = 0usize;
    let mut gold_outside = 0usize;
    let mut errors = Vec::new();

    for (doc, result) in docs.iter().zip(results) {
        let mut doc_evaluated = 0usize;
        let mut doc_correct = 0usize;
        for (mention, r) in doc.mentions.iter().zip(&result.mentions) {
            let Some(gold) = mention.gold.as_deref() else {
                no_gold += 1;
                continue;
            };
            let Some(gold_id) = vocab.entity_id(gold) else {
                gold_outside += 1;
                continue;
            };
            if r.candidates.is_empty() {
                no_candidates += 1;
                continue;
            }
            doc_evaluated += 1;
            if r.chosen_entity() == Some(gold_id) {
                doc_correct += 1;
            } else {
                let feature_of = |id: SymbolId| {
                    r.candidates
                        .iter()
                        .position(|&c| c == id)
                        .and_then(|i| r.features.get(i))
                        .cloned()
                };
                errors.push(ErrorRecord {
                    doc_id: doc.doc_id.clone(),
                    surface: mention.surface.clone(),
                    gold: gold.to_string(),
                    predicted: r.chosen_entity().map(|id| vocab.symbol(id).to_string()),
                    predicted_features: r.chosen_entity().and_then(feature_of),
                    gold_features: feature_of(gold_id),
                });
            }
        }
        if doc_evaluated > 0 {
            documents_evaluated += 1;
            macro_sum += doc_correct as f64 / doc_evaluated as f64;
            evaluated += doc_evaluated;
            correct += doc_correct;
        }
    }

    if evaluated == 0 {
        return Err(Error::data("no evaluable mentions in the dataset"));
    }
    Ok(NedEvaluation {
        micro_accuracy: correct as f64 / evaluated as f64,
        macro_accuracy: macro_sum / documents_evaluated as f64,
        evaluated_mentions: evaluated,
        correct_mentions: correct,
        documents_evaluated,
        mentions_without_candidates: no_candidates,
        mentions_without_gold: no_gold,
        gold_outside_kb: gold_outside,
        errors,
    })
}
