//! The named-entity-disambiguation pipeline: candidate generation, the
//! ranking feature set, the two-step procedure, and evaluation.
//!
//! Datasets are JSON lines, one document per line:
//!
//! ```json
//! {"doc_id": "d1", "text": "...", "mentions": [{"surface": "...", "start_token": 0, "end_token": 1, "gold": "Entity_Id"}]}
//! ```
//!
//! Token spans are half-open `[start_token, end_token)` indices into the
//! tokenized text. Prediction output keeps the input shape and adds
//! `predicted`, `candidates`, `scores`, and `step` per mention.

mod dictionary;
mod disambiguate;
mod features;

pub use dictionary::{Candidate, MentionDictionary, MAX_CANDIDATES_PER_SURFACE};
pub use disambiguate::{
    contexts_from_assignments, disambiguate_document, disambiguate_documents, evaluate_ned,
    training_instances, DisambiguationResult, ErrorRecord, LabeledInstance, MentionResult,
    NedEvaluation, UNAMBIGUOUS_PRIOR_THRESHOLD,
};
pub use features::{
    levenshtein, CandidateFeatures, ContextWordFilter, FeatureExtractor, FEATURE_NAMES,
};

use std::io::{BufRead, BufReader, Read, Write};
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::corpus::tokenize;
use crate::error::{Error, Result};

/// A mention to disambiguate: a surface string covering a token span, with
/// an optional gold entity.
#[derive(Debug, Clone)]
pub struct Mention {
    pub surface: String,
    pub span: Range<usize>,
    pub gold: Option<String>,
}

/// One input document.
#[derive(Debug, Clone)]
pub struct Document {
    pub doc_id: String,
    pub text: String,
    pub tokens: Vec<String>,
    pub mentions: Vec<Mention>,
}

impl Document {
    /// Builds a document from raw text, tokenizing it and validating the
    /// mention spans.
    pub fn new(doc_id: String, text: String, mentions: Vec<Mention>) -> Result<Self> {
        let tokens = tokenize(&text);
        for (i, m) in mentions.iter().enumerate() {
            if m.span.start > m.span.end || m.span.end > tokens.len() {
                return Err(Error::data(format!(
                    "document '{doc_id}': mention {i} span {}..{} out of bounds for {} tokens",
                    m.span.start,
                    m.span.end,
                    tokens.len()
                )));
            }
        }
        Ok(Document {
            doc_id,
            text,
            tokens,
            mentions,
        })
    }
}

#[derive(Serialize, Deserialize)]
struct MentionJson {
    surface: String,
    start_token: usize,
    end_token: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    gold: Option<String>,
}

#[derive(Serialize, Deserialize)]
struct DocumentJson {
    doc_id: String,
    text: String,
    mentions: Vec<MentionJson>,
}

/// Reads a JSON-lines dataset.
pub fn read_documents<R: Read>(reader: R) -> Result<Vec<Document>> {
    let mut docs = Vec::new();
    for (idx, line) in BufReader::new(reader).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: DocumentJson = serde_json::from_str(&line)
            .map_err(|e| Error::line(idx + 1, format!("invalid document record: {e}")))?;
        let mentions = raw
            .mentions
            .into_iter()
            .map(|m| Mention {
                surface: m.surface,
                span: m.start_token..m.end_token,
                gold: m.gold,
            })
            .collect();
        docs.push(
            Document::new(raw.doc_id, raw.text, mentions)
                .map_err(|e| Error::line(idx + 1, e.to_string()))?,
        );
    }
    Ok(docs)
}

pub fn read_documents_path(path: impl AsRef<std::path::Path>) -> Result<Vec<Document>> {
    read_documents(std::fs::File::open(path)?)
}

#[derive(Serialize)]
struct PredictedMentionJson<'a> {
    surface: &'a str,
    start_token: usize,
    end_token: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    gold: Option<&'a str>,
    predicted: Option<&'a str>,
    candidates: Vec<&'a str>,
    scores: &'a [f64],
    step: u8,
}

#[derive(Serialize)]
struct PredictedDocumentJson<'a> {
    doc_id: &'a str,
    text: &'a str,
    mentions: Vec<PredictedMentionJson<'a>>,
}

/// Writes predictions as JSON lines: the input document shape with
/// `predicted`, `candidates`, `scores`, and `step` added per mention.
pub fn write_predictions<W: Write>(
    mut writer: W,
    docs: &[Document],
    results: &[DisambiguationResult],
    vocab: &crate::corpus::Vocabulary,
) -> Result<()> {
    if docs.len() != results.len() {
        return Err(Error::data("documents and results are misaligned"));
    }
    for (doc, result) in docs.iter().zip(results) {
        let mentions = doc
            .mentions
            .iter()
            .zip(&result.mentions)
            .map(|(m, r)| PredictedMentionJson {
                surface: &m.surface,
                start_token: m.span.start,
                end_token: m.span.end,
                gold: m.gold.as_deref(),
                predicted: r.chosen_entity().map(|id| vocab.symbol(id)),
                candidates: r.candidates.iter().map(|&id| vocab.symbol(id)).collect(),
                scores: &r.scores,
                step: r.step,
            })
            .collect();
        let line = PredictedDocumentJson {
            doc_id: &doc.doc_id,
            text: &doc.text,
            mentions,
        };
        serde_json::to_writer(&mut writer, &line)
            .map_err(|e| Error::format(format!("cannot serialize prediction: {e}")))?;
        writeln!(writer)?;
    }
    Ok(())
}

/// Reads a predictions file back into documents plus (candidates, scores,
/// predicted, step) tuples per mention, for standalone evaluation.
pub fn read_predictions<R: Read>(
    reader: R,
) -> Result<Vec<(Document, Vec<PredictionRecord>)>> {
    #[derive(Deserialize)]
    struct PredMentionIn {
        surface: String,
        start_token: usize,
        end_token: usize,
        #[serde(default)]
        gold: Option<String>,
        #[serde(default)]
        predicted: Option<String>,
        #[serde(default)]
        candidates: Vec<String>,
        #[serde(default)]
        scores: Vec<f64>,
        #[serde(default = "default_step")]
        step: u8,
    }
    fn default_step() -> u8 {
        1
    }
    #[derive(Deserialize)]
    struct PredDocIn {
        doc_id: String,
        text: String,
        mentions: Vec<PredMentionIn>,
    }

    let mut out = Vec::new();
    for (idx, line) in BufReader::new(reader).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: PredDocIn = serde_json::from_str(&line)
            .map_err(|e| Error::line(idx + 1, format!("invalid prediction record: {e}")))?;
        let mut mentions = Vec::new();
        let mut records = Vec::new();
        for m in raw.mentions {
            mentions.push(Mention {
                surface: m.surface,
                span: m.start_token..m.end_token,
                gold: m.gold,
            });
            records.push(PredictionRecord {
                predicted: m.predicted,
                candidates: m.candidates,
                scores: m.scores,
                step: m.step,
            });
        }
        let doc = Document::new(raw.doc_id, raw.text, mentions)
            .map_err(|e| Error::line(idx + 1, e.to_string()))?;
        out.push((doc, records));
    }
    Ok(out)
}

/// One mention's prediction as read back from a predictions file.
#[derive(Debug, Clone)]
pub struct PredictionRecord {
    pub predicted: Option<String>,
    pub candidates: Vec<String>,
    pub scores: Vec<f64>,
    pub step: u8,
}
