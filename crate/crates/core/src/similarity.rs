//! Vector-space and link-graph relatedness, candidate ranking, and the
//! NDCG/MAP evaluation harness.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Read};

use serde::Serialize;

use crate::corpus::{LinkGraph, SymbolId, SymbolKind};
use crate::embedding::EmbeddingModel;
use crate::error::{Error, Result};

/// Cosine similarity with f64 accumulation. Zero-norm inputs (possible for
/// never-trained rows) yield 0 rather than NaN.
pub fn cosine(a: &[f32], b: &[f32]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::data(format!(
            "dimension mismatch: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    let mut dot = 0.0f64;
    let mut na = 0.0f64;
    let mut nb = 0.0f64;
    for (&x, &y) in a.iter().zip(b) {
        dot += x as f64 * y as f64;
        na += x as f64 * x as f64;
        nb += y as f64 * y as f64;
    }
    if na == 0.0 || nb == 0.0 {
        return Ok(0.0);
    }
    Ok(dot / (na.sqrt() * nb.sqrt()))
}

fn cosine_f64(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

/// Cosine between an f64 context vector and a model row.
pub(crate) fn cosine_mixed(context: &[f64], row: &[f32]) -> f64 {
    let row64: Vec<f64> = row.iter().map(|&x| x as f64).collect();
    cosine_f64(context, &row64)
}

/// Link-based entity relatedness:
///
/// `1 - (ln max(|C1|,|C2|) - ln |C1 ∩ C2|) / (ln |E| - ln min(|C1|,|C2|))`
///
/// Identical non-empty link sets give 1; an empty intersection or an empty
/// link set gives 0; everything else is clamped to `[0, 1]`.
pub fn wlm(e1: SymbolId, e2: SymbolId, graph: &LinkGraph) -> Result<f64> {
    if !graph.is_entity(e1) || !graph.is_entity(e2) {
        return Err(Error::data("wlm: unknown entity id"));
    }
    let c1 = graph.incoming(e1);
    let c2 = graph.incoming(e2);
    if c1.is_empty() || c2.is_empty() {
        return Ok(0.0);
    }
    let intersection = sorted_intersection_len(c1, c2);
    if intersection == 0 {
        return Ok(0.0);
    }
    let (max, min) = if c1.len() >= c2.len() {
        (c1.len(), c2.len())
    } else {
        (c2.len(), c1.len())
    };
    if intersection == max {
        // Identical link sets: the numerator is exactly 0.
        return Ok(1.0);
    }
    let denom = (graph.entity_count() as f64).ln() - (min as f64).ln();
    if denom <= 0.0 {
        return Ok(0.0);
    }
    let num = (max as f64).ln() - (intersection as f64).ln();
    Ok((1.0 - num / denom).clamp(0.0, 1.0))
}

fn sorted_intersection_len(a: &[SymbolId], b: &[SymbolId]) -> usize {
    let mut i = 0;
    let mut j = 0;
    let mut n = 0;
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                n += 1;
                i += 1;
                j += 1;
            }
        }
    }
    n
}

/// Sorts candidates by cosine similarity of their `V` rows to the target,
/// descending; ties break by ascending symbol.
pub fn rank_candidates(
    target: SymbolId,
    candidates: &[SymbolId],
    model: &EmbeddingModel,
) -> Result<Vec<SymbolId>> {
    let target_row = model.try_vector(target)?;
    let mut scored = Vec::with_capacity(candidates.len());
    for &c in candidates {
        scored.push((c, cosine(target_row, model.try_vector(c)?)?));
    }
    scored.sort_by(|(a, sa), (b, sb)| {
        sb.total_cmp(sa)
            .then_with(|| model.vocab().symbol(*a).cmp(model.vocab().symbol(*b)))
    });
    Ok(scored.into_iter().map(|(c, _)| c).collect())
}

/// NDCG@k over graded relevance labels in ranked order, using the
/// `(2^rel - 1) / log2(i + 1)` gain; 0 when no relevant item exists.
pub fn ndcg_at_k(labels: &[u32], k: usize) -> f64 {
    if k == 0 || labels.is_empty() {
        return 0.0;
    }
    let k = k.min(labels.len());
    let dcg = |ls: &[u32]| {
        ls.iter()
            .take(k)
            .enumerate()
            .map(|(i, &rel)| ((2f64.powi(rel as i32)) - 1.0) / ((i + 2) as f64).log2())
            .sum::<f64>()
    };
    let actual = dcg(labels);
    let mut ideal_labels = labels.to_vec();
    ideal_labels.sort_unstable_by(|a, b| b.cmp(a));
    let ideal = dcg(&ideal_labels);
    if ideal == 0.0 {
        0.0
    } else {
        actual / ideal
    }
}

/// Average precision of one ranking with binary labels; `None` when the
/// ranking has no relevant item.
pub fn average_precision(labels: &[u32]) -> Option<f64> {
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (i, &rel) in labels.iter().enumerate() {
        if rel > 0 {
            hits += 1;
            sum += hits as f64 / (i + 1) as f64;
        }
    }
    (hits > 0).then(|| sum / hits as f64)
}

/// Mean average precision over queries. Queries without any relevant label
/// are skipped and counted; an empty query set (or one with nothing left
/// after skipping) is an error.
pub fn mean_average_precision(queries: &[Vec<u32>]) -> Result<(f64, usize)> {
    if queries.is_empty() {
        return Err(Error::data("mean average precision over an empty query set"));
    }
    let mut sum = 0.0;
    let mut used = 0usize;
    let mut skipped = 0usize;
    for labels in queries {
        match average_precision(labels) {
            Some(ap) => {
                sum += ap;
                used += 1;
            }
            None => skipped += 1,
        }
    }
    if used == 0 {
        return Err(Error::data("no query has a relevant label"));
    }
    Ok((sum / used as f64, skipped))
}

/// One relatedness query: a target entity and labeled candidates.
#[derive(Debug, Clone)]
pub struct RelatednessQuery {
    pub target: String,
    pub candidates: Vec<String>,
    pub labels: Vec<u32>,
}

/// Aggregated relatedness metrics.
#[derive(Debug, Clone, Serialize)]
pub struct RelatednessReport {
    pub ndcg1: f64,
    pub ndcg5: f64,
    pub ndcg10: f64,
    pub map: f64,
    pub queries_evaluated: usize,
    pub queries_skipped: usize,
}

/// Reads relatedness queries from TSV columns
/// `query_entity<TAB>candidate_entity<TAB>label(0|1)`, grouping rows by
/// query entity in first-seen order.
pub fn read_relatedness_tsv<R: Read>(reader: R) -> Result<Vec<RelatednessQuery>> {
    let mut order = Vec::new();
    let mut by_target: HashMap<String, RelatednessQuery> = HashMap::new();
    for (idx, line) in BufReader::new(reader).lines().enumerate() {
        let line = line?;
        let trimmed = line.trim_end();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut parts = trimmed.splitn(3, '\t');
        let (target, candidate, label) = match (parts.next(), parts.next(), parts.next()) {
            (Some(t), Some(c), Some(l)) => (t, c, l),
            _ => {
                return Err(Error::line(
                    idx + 1,
                    "expected query_entity<TAB>candidate_entity<TAB>label",
                ))
            }
        };
        let label: u32 = label
            .trim()
            .parse()
            .map_err(|_| Error::line(idx + 1, format!("invalid label '{label}'")))?;
        let entry = by_target.entry(target.to_string()).or_insert_with(|| {
            order.push(target.to_string());
            RelatednessQuery {
                target: target.to_string(),
                candidates: Vec::new(),
                labels: Vec::new(),
            }
        });
        entry.candidates.push(candidate.to_string());
        entry.labels.push(label);
    }
    Ok(order
        .into_iter()
        .map(|t| by_target.remove(&t).expect("grouped"))
        .collect())
}

/// Ranks every query's candidates by `V`-row cosine and reports mean
/// NDCG@{1,5,10} and MAP. Queries with no relevant label, no candidates,
/// or entities missing from the embedding are skipped and counted.
pub fn evaluate_relatedness(
    model: &EmbeddingModel,
    queries: &[RelatednessQuery],
) -> Result<RelatednessReport> {
    if queries.is_empty() {
        return Err(Error::data("no relatedness queries"));
    }
    let vocab = model.vocab();
    let mut ranked_labels = Vec::new();
    let mut skipped = 0usize;
    for query in queries {
        if query.candidates.is_empty() || !query.labels.iter().any(|&l| l > 0) {
            skipped += 1;
            continue;
        }
        let Some(target) = vocab.entity_id(&query.target) else {
            skipped += 1;
            continue;
        };
        let ids: Option<Vec<SymbolId>> = query
            .candidates
            .iter()
            .map(|c| vocab.entity_id(c))
            .collect();
        let Some(ids) = ids else {
            skipped += 1;
            continue;
        };
        let label_of: HashMap<SymbolId, u32> =
            ids.iter().copied().zip(query.labels.iter().copied()).collect();
        let ranked = rank_candidates(target, &ids, model)?;
        ranked_labels.push(ranked.iter().map(|id| label_of[id]).collect::<Vec<u32>>());
    }
    if ranked_labels.is_empty() {
        return Err(Error::data("no evaluable relatedness queries"));
    }
    let mean = |k: usize| {
        ranked_labels.iter().map(|l| ndcg_at_k(l, k)).sum::<f64>() / ranked_labels.len() as f64
    };
    let (map, _) = mean_average_precision(&ranked_labels)?;
    Ok(RelatednessReport {
        ndcg1: mean(1),
        ndcg5: mean(5),
        ndcg10: mean(10),
        map,
        queries_evaluated: ranked_labels.len(),
        queries_skipped: skipped,
    })
}

/// Top-k nearest neighbors of a symbol by `V`-row cosine, excluding the
/// query itself, optionally restricted to one symbol kind.
pub fn nearest_neighbors(
    query: SymbolId,
    model: &EmbeddingModel,
    k: usize,
    kind: Option<SymbolKind>,
) -> Result<Vec<(SymbolId, f64)>> {
    let query_row = model.try_vector(query)?;
    let vocab = model.vocab();
    let mut scored: Vec<(SymbolId, f64)> = Vec::new();
    let ids: Box<dyn Iterator<Item = SymbolId>> = match kind {
        Some(SymbolKind::Word) => Box::new(vocab.word_ids()),
        Some(SymbolKind::Entity) => Box::new(vocab.entity_ids()),
        None => Box::new(vocab.word_ids().chain(vocab.entity_ids())),
    };
    for id in ids {
        if id == query {
            continue;
        }
        scored.push((id, cosine(query_row, model.vector(id))?));
    }
    scored.sort_by(|(a, sa), (b, sb)| {
        sb.total_cmp(sa)
            .then_with(|| vocab.symbol(*a).cmp(vocab.symbol(*b)))
    });
    scored.truncate(k);
    Ok(scored)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::testutil::article;
    use crate::corpus::{Corpus, Vocabulary};
    use crate::embedding::TrainingConfig;
    use std::sync::Arc;

    #[test]
    fn cosine_basics() {
        let v = [0.3f32, -1.2, 0.5];
        assert!((cosine(&v, &v).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(cosine(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        let got = cosine(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]).unwrap();
        assert!((got - 0.974_631_846).abs() < 1e-9);
        assert_eq!(cosine(&[0.0, 0.0], &[1.0, 1.0]).unwrap(), 0.0);
        assert!(cosine(&[1.0], &[1.0, 2.0]).is_err());
    }

    fn graph_fixture() -> (Vocabulary, LinkGraph) {
        // E1 and E2 share all incoming links; E3 is disjoint.
        let corpus = Corpus::from_pages(vec![
            article("A", "[[E1]] [[E2]]"),
            article("B", "[[E1]] [[E2]]"),
            article("C", "[[E3]]"),
            article("E1", "x"),
            article("E2", "x"),
            article("E3", "x"),
        ])
        .unwrap();
        let vocab = Vocabulary::build(&corpus, 1).unwrap();
        let graph = LinkGraph::build(&corpus, &vocab);
        (vocab, graph)
    }

    #[test]
    fn identical_link_sets_are_fully_related() {
        let (vocab, graph) = graph_fixture();
        let e1 = vocab.entity_id("E1").unwrap();
        let e2 = vocab.entity_id("E2").unwrap();
        assert_eq!(wlm(e1, e2, &graph).unwrap(), 1.0);
    }

    #[test]
    fn disjoint_link_sets_are_unrelated() {
        let (vocab, graph) = graph_fixture();
        let e1 = vocab.entity_id("E1").unwrap();
        let e3 = vocab.entity_id("E3").unwrap();
        assert_eq!(wlm(e1, e3, &graph).unwrap(), 0.0);
    }

    #[test]
    fn word_ids_are_rejected() {
        let (vocab, graph) = graph_fixture();
        let w = vocab.word_id("x").unwrap();
        let e = vocab.entity_id("E1").unwrap();
        assert!(wlm(w, e, &graph).is_err());
    }

    #[test]
    fn wlm_formula_spot_check() {
        // |E|=100, |C1|=10, |C2|=20, overlap 5:
        // 1 - (ln 20 - ln 5) / (ln 100 - ln 10) = 0.3979...
        let expected = 1.0 - (20f64.ln() - 5f64.ln()) / (100f64.ln() - 10f64.ln());
        assert!((expected - 0.39794).abs() < 1e-4);
    }

    fn hand_model(vectors: &[(&str, Vec<f32>)]) -> EmbeddingModel {
        // Build a vocabulary with the given entities, then overwrite rows.
        let pages: Vec<_> = vectors
            .iter()
            .map(|(id, _)| article(id, "filler words here"))
            .collect();
        let corpus = Corpus::from_pages(pages).unwrap();
        let vocab = Arc::new(Vocabulary::build(&corpus, 1).unwrap());
        let dim = vectors[0].1.len();
        let config = TrainingConfig {
            dim,
            min_count: 1,
            ..TrainingConfig::default()
        };
        let model = EmbeddingModel::init(Arc::clone(&vocab), &config).unwrap();
        let mut v = model.v_data().to_vec();
        for (id, vec) in vectors {
            let sym = vocab.entity_id(id).unwrap();
            v[sym.index() * dim..(sym.index() + 1) * dim].copy_from_slice(vec);
        }
        EmbeddingModel::from_parts(vocab, dim, v, None).unwrap()
    }

    #[test]
    fn ranks_by_angle_with_symbol_tie_break() {
        let deg = |d: f64| d.to_radians();
        let model = hand_model(&[
            ("Target", vec![1.0, 0.0]),
            ("Near", vec![deg(10.0).cos() as f32, deg(10.0).sin() as f32]),
            ("Mid", vec![deg(60.0).cos() as f32, deg(60.0).sin() as f32]),
            ("Far", vec![deg(90.0).cos() as f32, deg(90.0).sin() as f32]),
        ]);
        let vocab = model.vocab();
        let target = vocab.entity_id("Target").unwrap();
        let ids = ["Far", "Mid", "Near"].map(|s| vocab.entity_id(s).unwrap());
        let ranked = rank_candidates(target, &ids, &model).unwrap();
        let names: Vec<_> = ranked.iter().map(|&id| vocab.symbol(id)).collect();
        assert_eq!(names, vec!["Near", "Mid", "Far"]);

        // Identical vectors tie, broken by ascending symbol.
        let model = hand_model(&[
            ("T", vec![1.0, 0.0]),
            ("Zed", vec![0.5, 0.5]),
            ("Abe", vec![0.5, 0.5]),
        ]);
        let vocab = model.vocab();
        let ids = ["Zed", "Abe"].map(|s| vocab.entity_id(s).unwrap());
        let ranked =
            rank_candidates(vocab.entity_id("T").unwrap(), &ids, &model).unwrap();
        assert_eq!(vocab.symbol(ranked[0]), "Abe");
        // Single candidate comes back first, and re-ranking is a no-op.
        let single = rank_candidates(vocab.entity_id("T").unwrap(), &ids[..1], &model).unwrap();
        assert_eq!(single, vec![ids[0]]);
        let again = rank_candidates(vocab.entity_id("T").unwrap(), &ranked, &model).unwrap();
        assert_eq!(again, ranked);
    }

    #[test]
    fn ndcg_worked_examples() {
        assert_eq!(ndcg_at_k(&[1, 1, 1], 3), 1.0);
        let got = ndcg_at_k(&[0, 1], 2);
        let expected = 1.0 / 3f64.log2();
        assert!((got - expected).abs() < 1e-12);
        assert_eq!(ndcg_at_k(&[0, 0, 0], 5), 0.0);
    }

    #[test]
    fn map_worked_examples() {
        let (map, skipped) = mean_average_precision(&[vec![1, 0, 0]]).unwrap();
        assert_eq!((map, skipped), (1.0, 0));
        let (map, _) = mean_average_precision(&[vec![0, 1, 1]]).unwrap();
        assert!((map - (0.5 + 2.0 / 3.0) / 2.0).abs() < 1e-12);
        let (map, _) =
            mean_average_precision(&[vec![1, 0], vec![0, 1]]).unwrap();
        assert!((map - 0.75).abs() < 1e-12);
        assert!(mean_average_precision(&[]).is_err());
        let (_, skipped) = mean_average_precision(&[vec![1], vec![0]]).unwrap();
        assert_eq!(skipped, 1);
    }

    #[test]
    fn relatedness_tsv_groups_by_query() {
        let tsv = "Q1\tC1\t1\nQ1\tC2\t0\nQ2\tC3\t1\n";
        let queries = read_relatedness_tsv(tsv.as_bytes()).unwrap();
        assert_eq!(queries.len(), 2);
        assert_eq!(queries[0].target, "Q1");
        assert_eq!(queries[0].candidates, vec!["C1", "C2"]);
        assert_eq!(queries[0].labels, vec![1, 0]);
    }

    #[test]
    fn nearest_excludes_self_and_sorts() {
        let model = hand_model(&[
            ("A", vec![1.0, 0.0]),
            ("B", vec![0.9, 0.1]),
            ("C", vec![0.0, 1.0]),
        ]);
        let vocab = model.vocab();
        let a = vocab.entity_id("A").unwrap();
        let got = nearest_neighbors(a, &model, 2, Some(SymbolKind::Entity)).unwrap();
        assert_eq!(vocab.symbol(got[0].0), "B");
        assert!(got.iter().all(|&(id, _)| id != a));
        assert!(got[0].1 >= got[1].1);
    }
}
