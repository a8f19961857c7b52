//! The negative-sampling SGD kernel and the three-pass training loop.
//!
//! Each page visit runs, in order: the word pass (skip-gram word pairs),
//! the anchor pass (entity -> context word pairs), and the graph pass
//! (entity -> incoming-link pairs). All three share one NEG update rule;
//! only the target/context rows and the noise distribution differ.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use serde::Serialize;

use crate::corpus::{
    extract_anchor_occurrences, AnchorOccurrence, Corpus, LinkGraph, SymbolId, Vocabulary,
};
use crate::error::{Error, Result};

use super::matrix::{dot_rows, AtomicF32, SharedMatrix};
use super::sampler::NegativeSampler;
use super::{EmbeddingModel, TrainingConfig};

/// Sigmoid arguments are clamped to this magnitude to avoid overflow;
/// reported objective values use the clamped argument too.
pub const SIGMOID_CLAMP: f64 = 30.0;

/// Logistic function with the argument clamped to `[-30, 30]`.
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    let x = x.clamp(-SIGMOID_CLAMP, SIGMOID_CLAMP);
    1.0 / (1.0 + (-x).exp())
}

/// `ln(sigmoid(x))` with the same clamping, computed stably.
#[inline]
pub fn log_sigmoid(x: f64) -> f64 {
    let x = x.clamp(-SIGMOID_CLAMP, SIGMOID_CLAMP);
    -(-x).exp().ln_1p()
}

/// Gradient coefficient and objective term for one (target, output) pair.
///
/// For the positive output the objective term is `ln σ(s)` and the
/// coefficient `1 - σ(s)`; for a sampled negative the term is `ln σ(-s)`
/// and the coefficient `-σ(s)`. The gradient of the pair's objective with
/// respect to the target row is `coef * u_out`, and with respect to the
/// output row `coef * v_target`.
#[inline]
fn pair_term(dot: f64, positive: bool) -> (f64, f64) {
    if positive {
        (1.0 - sigmoid(dot), log_sigmoid(dot))
    } else {
        (-sigmoid(dot), log_sigmoid(-dot))
    }
}

/// Exact analytic gradients of the per-step NEG objective
/// `ln σ(v·u_pos) + Σ_i ln σ(-v·u_neg_i)`, all in f64.
///
/// `negatives` entries are per-occurrence: if the same row id is listed
/// twice its total gradient is the sum of the corresponding entries.
#[derive(Debug, Clone)]
pub struct NegGradients {
    /// Objective value at the evaluation point.
    pub objective: f64,
    /// d objective / d target row.
    pub target: Vec<f64>,
    /// d objective / d positive output row.
    pub positive: Vec<f64>,
    /// d objective / d each negative output row, aligned with the input.
    pub negatives: Vec<Vec<f64>>,
}

/// Computes the NEG objective and its analytic gradients at a point.
///
/// This is the same coefficient rule [`neg_step`] applies; it exists as a
/// pure function so the gradients can be checked against finite
/// differences in 64-bit arithmetic.
pub fn neg_gradients(target: &[f64], positive: &[f64], negatives: &[Vec<f64>]) -> NegGradients {
    let dim = target.len();
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();

    let (coef_pos, term_pos) = pair_term(dot(target, positive), true);
    let mut objective = term_pos;
    let mut grad_target: Vec<f64> = positive.iter().map(|&x| coef_pos * x).collect();
    let grad_positive: Vec<f64> = target.iter().map(|&x| coef_pos * x).collect();

    let mut grad_negatives = Vec::with_capacity(negatives.len());
    for neg in negatives {
        let (coef, term) = pair_term(dot(target, neg), false);
        objective += term;
        for d in 0..dim {
            grad_target[d] += coef * neg[d];
        }
        grad_negatives.push(target.iter().map(|&x| coef * x).collect());
    }

    NegGradients {
        objective,
        target: grad_target,
        positive: grad_positive,
        negatives: grad_negatives,
    }
}

/// Reusable per-worker buffers for [`neg_step`].
pub struct StepScratch {
    delta: Vec<f64>,
    coefs: Vec<f64>,
}

impl StepScratch {
    pub fn new(dim: usize) -> Self {
        StepScratch {
            delta: vec![0.0; dim],
            coefs: Vec::new(),
        }
    }
}

/// One gradient-ascent step of the NEG objective on shared parameters.
///
/// Updates row `V[target]`, row `U[context]`, and the rows `U[n]` for each
/// sampled negative, using the exact simultaneous gradient at the
/// pre-update point (all dot products are taken before any row is
/// written). Returns the pre-update objective value.
pub fn neg_step(
    v: &SharedMatrix,
    u: &SharedMatrix,
    target: SymbolId,
    context: SymbolId,
    negatives: &[SymbolId],
    lr: f64,
    scratch: &mut StepScratch,
) -> Result<f64> {
    let dim = v.dim();
    let v_target = v.row(target.index());
    let u_context = u.row(context.index());

    scratch.delta.clear();
    scratch.delta.resize(dim, 0.0);
    scratch.coefs.clear();

    let dot = dot_rows(v_target, u_context);
    if !dot.is_finite() {
        return Err(Error::data("numerical overflow"));
    }
    let (coef_pos, term_pos) = pair_term(dot, true);
    let mut objective = term_pos;
    accumulate(&mut scratch.delta, u_context, coef_pos);

    for &neg in negatives {
        let u_neg = u.row(neg.index());
        let dot = dot_rows(v_target, u_neg);
        if !dot.is_finite() {
            return Err(Error::data("numerical overflow"));
        }
        let (coef, term) = pair_term(dot, false);
        objective += term;
        accumulate(&mut scratch.delta, u_neg, coef);
        scratch.coefs.push(coef);
    }

    if lr == 0.0 {
        return Ok(objective);
    }

    // Output rows first: they read the still-unmodified target row.
    axpy(u_context, v_target, lr * coef_pos);
    for (&neg, &coef) in negatives.iter().zip(&scratch.coefs) {
        axpy(u.row(neg.index()), v_target, lr * coef);
    }
    for (cell, &d) in v_target.iter().zip(&scratch.delta) {
        cell.set(cell.get() + (lr * d) as f32);
    }
    Ok(objective)
}

#[inline]
fn accumulate(delta: &mut [f64], row: &[AtomicF32], coef: f64) {
    for (d, cell) in delta.iter_mut().zip(row) {
        *d += coef * cell.get() as f64;
    }
}

#[inline]
fn axpy(out: &[AtomicF32], row: &[AtomicF32], scale: f64) {
    for (o, cell) in out.iter().zip(row) {
        o.set(o.get() + (scale * cell.get() as f64) as f32);
    }
}

/// Learning rate decayed linearly over the total number of page visits,
/// floored at `1e-4 * alpha0`.
#[derive(Debug, Clone, Copy)]
pub struct LrSchedule {
    alpha0: f64,
    total_visits: u64,
}

impl LrSchedule {
    pub fn new(alpha0: f64, total_visits: u64) -> Self {
        LrSchedule {
            alpha0,
            total_visits: total_visits.max(1),
        }
    }

    pub fn lr_at(&self, visit: u64) -> f64 {
        let progress = visit as f64 / self.total_visits as f64;
        self.alpha0 * (1.0 - progress).max(1e-4)
    }
}

/// Which objective a training pair belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairKind {
    /// Word pass: word target, word context, word negatives.
    Word,
    /// Anchor pass: entity target, context-word context, word negatives.
    Anchor,
    /// Graph pass: entity target, incoming-link context, entity negatives.
    Graph,
}

/// One (target, context) training pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrainPair {
    pub kind: PairKind,
    pub target: SymbolId,
    pub context: SymbolId,
}

/// A page resolved against the vocabulary, ready for training.
#[derive(Debug, Clone)]
pub struct PreparedPage {
    /// The page subject entity.
    pub subject: SymbolId,
    /// Word id per token position; `None` for out-of-vocabulary tokens.
    pub word_positions: Vec<Option<SymbolId>>,
    /// Anchor occurrences with their context windows.
    pub occurrences: Vec<AnchorOccurrence>,
}

/// Resolves all article pages against a vocabulary. Returns the prepared
/// pages and the total number of dropped anchors.
pub fn prepare_pages(
    corpus: &Corpus,
    vocab: &Vocabulary,
    window: usize,
) -> Result<(Vec<PreparedPage>, u64)> {
    let mut pages = Vec::new();
    let mut dropped_total = 0u64;
    for page in corpus.articles() {
        let subject = vocab.entity_id(&page.id).ok_or_else(|| {
            Error::data(format!(
                "vocabulary mismatch: page subject '{}' is not in the vocabulary",
                page.id
            ))
        })?;
        let (occurrences, dropped) = extract_anchor_occurrences(page, corpus, vocab, window);
        dropped_total += dropped;
        pages.push(PreparedPage {
            subject,
            word_positions: page.tokens.iter().map(|t| vocab.word_id(t)).collect(),
            occurrences,
        });
    }
    Ok((pages, dropped_total))
}

/// Enumerates a page's training pairs in schedule order: word pass, then
/// anchor pass, then graph pass.
pub fn for_each_pair<F>(
    page: &PreparedPage,
    graph: &LinkGraph,
    window: usize,
    mut f: F,
) -> Result<()>
where
    F: FnMut(TrainPair) -> Result<()>,
{
    // Word pass: positional windows over the raw token sequence.
    let positions = &page.word_positions;
    for (t, target) in positions.iter().enumerate() {
        let Some(target) = *target else { continue };
        let lo = t.saturating_sub(window);
        let hi = (t + window).min(positions.len().saturating_sub(1));
        for (j, context) in positions[lo..=hi].iter().enumerate() {
            if lo + j == t {
                continue;
            }
            if let Some(context) = *context {
                f(TrainPair {
                    kind: PairKind::Word,
                    target,
                    context,
                })?;
            }
        }
    }
    // Anchor pass.
    for occ in &page.occurrences {
        for &word in &occ.context_words {
            f(TrainPair {
                kind: PairKind::Anchor,
                target: occ.entity,
                context: word,
            })?;
        }
    }
    // Graph pass.
    for &inlink in graph.incoming(page.subject) {
        if inlink == page.subject {
            continue;
        }
        f(TrainPair {
            kind: PairKind::Graph,
            target: page.subject,
            context: inlink,
        })?;
    }
    Ok(())
}

/// Collects a page's pairs into a vector (test and inspection helper).
pub fn page_pairs(page: &PreparedPage, graph: &LinkGraph, window: usize) -> Vec<TrainPair> {
    let mut out = Vec::new();
    for_each_pair(page, graph, window, |p| {
        out.push(p);
        Ok(())
    })
    .expect("infallible collector");
    out
}

/// Per-epoch objective totals and pair counts.
#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct EpochStats {
    pub word_pairs: u64,
    pub anchor_pairs: u64,
    pub graph_pairs: u64,
    pub word_objective: f64,
    pub anchor_objective: f64,
    pub graph_objective: f64,
}

impl EpochStats {
    pub fn total_pairs(&self) -> u64 {
        self.word_pairs + self.anchor_pairs + self.graph_pairs
    }

    /// Summed NEG objective over all three passes.
    pub fn total_objective(&self) -> f64 {
        self.word_objective + self.anchor_objective + self.graph_objective
    }

    fn add(&mut self, kind: PairKind, objective: f64) {
        match kind {
            PairKind::Word => {
                self.word_pairs += 1;
                self.word_objective += objective;
            }
            PairKind::Anchor => {
                self.anchor_pairs += 1;
                self.anchor_objective += objective;
            }
            PairKind::Graph => {
                self.graph_pairs += 1;
                self.graph_objective += objective;
            }
        }
    }

    fn merge(&mut self, other: &EpochStats) {
        self.word_pairs += other.word_pairs;
        self.anchor_pairs += other.anchor_pairs;
        self.graph_pairs += other.graph_pairs;
        self.word_objective += other.word_objective;
        self.anchor_objective += other.anchor_objective;
        self.graph_objective += other.graph_objective;
    }
}

struct Shard<'a> {
    pages: &'a [PreparedPage],
    word_seed: u64,
    entity_seed: u64,
}

fn process_shard(
    shard: Shard<'_>,
    v: &SharedMatrix,
    u: &SharedMatrix,
    graph: &LinkGraph,
    vocab: &Vocabulary,
    config: &TrainingConfig,
    schedule: &LrSchedule,
    visits: &AtomicU64,
) -> Result<EpochStats> {
    // The word sampler is only needed once a word or anchor pair shows up;
    // a corpus whose words were all pruned still trains its graph pass.
    let mut words = if vocab.word_count() > 0 {
        Some(NegativeSampler::words(vocab, shard.word_seed)?)
    } else {
        None
    };
    let mut entities = NegativeSampler::entities(vocab, shard.entity_seed)?;
    let mut scratch = StepScratch::new(config.dim);
    let mut negatives: Vec<SymbolId> = Vec::with_capacity(config.negatives);
    let mut stats = EpochStats::default();

    for page in shard.pages {
        let visit = visits.fetch_add(1, Ordering::Relaxed);
        let lr = schedule.lr_at(visit);
        for_each_pair(page, graph, config.window, |pair| {
            let sampler = match pair.kind {
                PairKind::Word | PairKind::Anchor => words
                    .as_mut()
                    .ok_or_else(|| Error::data("word pair generated without word vocabulary"))?,
                PairKind::Graph => &mut entities,
            };
            sampler.draw_into(pair.context, config.negatives, &mut negatives)?;
            let objective = neg_step(v, u, pair.target, pair.context, &negatives, lr, &mut scratch)?;
            stats.add(pair.kind, objective);
            Ok(())
        })?;
    }
    Ok(stats)
}

fn shard_seeds(config: &TrainingConfig, epoch: usize, shard: usize) -> (u64, u64) {
    (
        mix_seed(&[config.seed, epoch as u64, shard as u64, 0x77]),
        mix_seed(&[config.seed, epoch as u64, shard as u64, 0xEE]),
    )
}

fn mix_seed(parts: &[u64]) -> u64 {
    let mut h = 0x9E37_79B9_7F4A_7C15u64;
    for &p in parts {
        h ^= p;
        h = splitmix64(h);
    }
    h
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Trains the joint embedding over `config.epochs` passes of the corpus.
///
/// With `workers == 1` (or without the `parallel` feature) pages are
/// processed sequentially and the result is bit-reproducible for a fixed
/// seed. With more workers, pages are sharded across threads that update
/// the shared matrices without locks; lost updates are tolerated.
pub fn train(
    corpus: &Corpus,
    graph: &LinkGraph,
    vocab: &Arc<Vocabulary>,
    config: &TrainingConfig,
) -> Result<(EmbeddingModel, Vec<EpochStats>)> {
    config.validate()?;
    if graph.entity_count() != vocab.entity_count() || graph.word_count() != vocab.word_count() {
        return Err(Error::data(
            "vocabulary mismatch: link graph shape differs from vocabulary",
        ));
    }
    let (pages, dropped) = prepare_pages(corpus, vocab, config.window)?;
    if dropped > 0 {
        log::info!("training: {dropped} anchors dropped (unresolvable or out-of-vocabulary)");
    }
    if pages.is_empty() {
        return Err(Error::data("empty corpus"));
    }

    let init = EmbeddingModel::init(Arc::clone(vocab), config)?;
    let rows = vocab.len();
    let (v_init, u_init) = init.into_matrices();
    let v = SharedMatrix::from_vec(v_init, rows, config.dim);
    let u = SharedMatrix::from_vec(u_init.expect("initialized model has output vectors"), rows, config.dim);

    let schedule = LrSchedule::new(config.alpha0, (config.epochs * pages.len()) as u64);
    let visits = AtomicU64::new(0);
    let mut epoch_stats = Vec::with_capacity(config.epochs);

    #[cfg(feature = "parallel")]
    let pool = if config.workers > 1 {
        Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(config.workers)
                .build()
                .map_err(|e| Error::config(format!("cannot build thread pool: {e}")))?,
        )
    } else {
        None
    };
    #[cfg(not(feature = "parallel"))]
    if config.workers > 1 {
        log::warn!(
            "built without the `parallel` feature: training sequentially despite workers={}",
            config.workers
        );
    }

    for epoch in 0..config.epochs {
        #[cfg(feature = "parallel")]
        let stats = match &pool {
            Some(pool) => epoch_parallel(
                pool, &pages, &v, &u, graph, vocab, config, &schedule, &visits, epoch,
            )?,
            None => epoch_sequential(&pages, &v, &u, graph, vocab, config, &schedule, &visits, epoch)?,
        };
        #[cfg(not(feature = "parallel"))]
        let stats =
            epoch_sequential(&pages, &v, &u, graph, vocab, config, &schedule, &visits, epoch)?;

        log::debug!(
            "epoch {epoch}: objective {:.4} over {} pairs",
            stats.total_objective(),
            stats.total_pairs()
        );
        epoch_stats.push(stats);
    }

    let model = EmbeddingModel::from_parts(
        Arc::clone(vocab),
        config.dim,
        v.to_vec(),
        Some(u.to_vec()),
    )?;
    Ok((model, epoch_stats))
}

#[allow(clippy::too_many_arguments)]
fn epoch_sequential(
    pages: &[PreparedPage],
    v: &SharedMatrix,
    u: &SharedMatrix,
    graph: &LinkGraph,
    vocab: &Vocabulary,
    config: &TrainingConfig,
    schedule: &LrSchedule,
    visits: &AtomicU64,
    epoch: usize,
) -> Result<EpochStats> {
    let (word_seed, entity_seed) = shard_seeds(config, epoch, 0);
    process_shard(
        Shard {
            pages,
            word_seed,
            entity_seed,
        },
        v,
        u,
        graph,
        vocab,
        config,
        schedule,
        visits,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::testutil::article;
    use crate::corpus::Corpus;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Test-local objective, independent of the implementation path:
    /// ln(1/(1+e^{-v.p})) + sum_i ln(1/(1+e^{v.n_i})), plain f64.
    fn oracle_objective(target: &[f64], positive: &[f64], negatives: &[Vec<f64>]) -> f64 {
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        let ln_sig = |x: f64| (1.0 / (1.0 + (-x).exp())).ln();
        let mut obj = ln_sig(dot(target, positive));
        for n in negatives {
            obj += ln_sig(-dot(target, n));
        }
        obj
    }

    fn random_vec(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
        (0..dim).map(|_| rng.gen_range(-0.8..0.8)).collect()
    }

    /// Central finite differences of the oracle objective with respect to
    /// one flattened parameter layout: [target, positive, negatives...].
    fn fd_gradient(
        target: &[f64],
        positive: &[f64],
        negatives: &[Vec<f64>],
        h: f64,
    ) -> (Vec<f64>, Vec<f64>, Vec<Vec<f64>>) {
        let dim = target.len();
        let perturb = |t: &[f64], p: &[f64], ns: &[Vec<f64>]| oracle_objective(t, p, ns);
        let mut grad_t = vec![0.0; dim];
        let mut grad_p = vec![0.0; dim];
        let mut grad_ns = vec![vec![0.0; dim]; negatives.len()];
        for d in 0..dim {
            let mut tp = target.to_vec();
            tp[d] += h;
            let mut tm = target.to_vec();
            tm[d] -= h;
            grad_t[d] = (perturb(&tp, positive, negatives) - perturb(&tm, positive, negatives))
                / (2.0 * h);

            let mut pp = positive.to_vec();
            pp[d] += h;
            let mut pm = positive.to_vec();
            pm[d] -= h;
            grad_p[d] =
                (perturb(target, &pp, negatives) - perturb(target, &pm, negatives)) / (2.0 * h);

            for (i, g) in grad_ns.iter_mut().enumerate() {
                let mut np = negatives.to_vec();
                np[i][d] += h;
                let mut nm = negatives.to_vec();
                nm[i][d] -= h;
                g[d] = (perturb(target, positive, &np) - perturb(target, positive, &nm))
                    / (2.0 * h);
            }
        }
        (grad_t, grad_p, grad_ns)
    }

    fn max_rel_err(analytic: &[f64], numeric: &[f64]) -> f64 {
        analytic
            .iter()
            .zip(numeric)
            .map(|(&a, &n)| (a - n).abs() / a.abs().max(n.abs()).max(1e-8))
            .fold(0.0, f64::max)
    }

    #[test]
    fn analytic_gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let dim = 8;
        let h = 1e-5;
        let mut worst = 0.0f64;
        for _ in 0..50 {
            let target = random_vec(&mut rng, dim);
            let positive = random_vec(&mut rng, dim);
            let negatives: Vec<Vec<f64>> =
                (0..4).map(|_| random_vec(&mut rng, dim)).collect();
            let grads = neg_gradients(&target, &positive, &negatives);
            assert!(
                (grads.objective - oracle_objective(&target, &positive, &negatives)).abs() < 1e-12
            );
            let (fd_t, fd_p, fd_ns) = fd_gradient(&target, &positive, &negatives, h);
            worst = worst.max(max_rel_err(&grads.target, &fd_t));
            worst = worst.max(max_rel_err(&grads.positive, &fd_p));
            for (a, n) in grads.negatives.iter().zip(&fd_ns) {
                worst = worst.max(max_rel_err(a, n));
            }
        }
        assert!(worst < 1e-4, "max relative error {worst}");
    }

    fn toy_matrices(rows: usize, dim: usize, seed: u64) -> (SharedMatrix, SharedMatrix) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let fill = |rng: &mut ChaCha8Rng| {
            (0..rows * dim)
                .map(|_| rng.gen_range(-0.5f32..0.5f32))
                .collect::<Vec<_>>()
        };
        (
            SharedMatrix::from_vec(fill(&mut rng), rows, dim),
            SharedMatrix::from_vec(fill(&mut rng), rows, dim),
        )
    }

    #[test]
    fn zero_learning_rate_leaves_parameters_unchanged() {
        let (v, u) = toy_matrices(6, 8, 3);
        let before_v = v.to_vec();
        let before_u = u.to_vec();
        let negatives = [SymbolId(2), SymbolId(3), SymbolId(2)];
        let mut scratch = StepScratch::new(8);
        let obj = neg_step(&v, &u, SymbolId(0), SymbolId(1), &negatives, 0.0, &mut scratch)
            .unwrap();
        assert_eq!(v.to_vec(), before_v);
        assert_eq!(u.to_vec(), before_u);
        // Returned value equals the objective at the current point.
        let t: Vec<f64> = v.row_to_vec(0).iter().map(|&x| x as f64).collect();
        let p: Vec<f64> = u.row_to_vec(1).iter().map(|&x| x as f64).collect();
        let ns: Vec<Vec<f64>> = negatives
            .iter()
            .map(|n| u.row_to_vec(n.index()).iter().map(|&x| x as f64).collect())
            .collect();
        assert!((obj - oracle_objective(&t, &p, &ns)).abs() < 1e-9);
    }

    #[test]
    fn step_applies_learning_rate_times_analytic_gradient() {
        let (v, u) = toy_matrices(6, 8, 11);
        let target = SymbolId(0);
        let context = SymbolId(4);
        let negatives = [SymbolId(1), SymbolId(5)];
        let lr = 1e-3;

        let to64 = |row: Vec<f32>| row.into_iter().map(|x| x as f64).collect::<Vec<f64>>();
        let t = to64(v.row_to_vec(0));
        let p = to64(u.row_to_vec(4));
        let ns: Vec<Vec<f64>> = negatives
            .iter()
            .map(|n| to64(u.row_to_vec(n.index())))
            .collect();
        let grads = neg_gradients(&t, &p, &ns);

        let mut scratch = StepScratch::new(8);
        neg_step(&v, &u, target, context, &negatives, lr, &mut scratch).unwrap();

        for d in 0..8 {
            let expected = t[d] + lr * grads.target[d];
            assert!((v.row_to_vec(0)[d] as f64 - expected).abs() < 1e-6);
            let expected = p[d] + lr * grads.positive[d];
            assert!((u.row_to_vec(4)[d] as f64 - expected).abs() < 1e-6);
        }
    }

    #[test]
    fn repeated_steps_increase_the_objective() {
        let (v, u) = toy_matrices(8, 8, 17);
        let negatives = [SymbolId(2), SymbolId(3), SymbolId(5)];
        let mut scratch = StepScratch::new(8);
        let mut last = f64::NEG_INFINITY;
        for _ in 0..200 {
            let obj = neg_step(&v, &u, SymbolId(0), SymbolId(1), &negatives, 0.01, &mut scratch)
                .unwrap();
            assert!(obj >= last - 1e-9, "objective decreased: {last} -> {obj}");
            last = obj;
        }
    }

    #[test]
    fn update_touches_only_the_expected_rows() {
        let (v, u) = toy_matrices(8, 4, 23);
        let before_v = v.to_vec();
        let before_u = u.to_vec();
        let negatives = [SymbolId(6)];
        let mut scratch = StepScratch::new(4);
        neg_step(&v, &u, SymbolId(2), SymbolId(5), &negatives, 0.1, &mut scratch).unwrap();
        let after_v = v.to_vec();
        let after_u = u.to_vec();
        for row in 0..8 {
            let range = row * 4..(row + 1) * 4;
            let v_changed = before_v[range.clone()] != after_v[range.clone()];
            let u_changed = before_u[range.clone()] != after_u[range.clone()];
            assert_eq!(v_changed, row == 2, "V row {row}");
            assert_eq!(u_changed, row == 5 || row == 6, "U row {row}");
        }
    }

    #[test]
    fn schedule_halves_at_midpoint_and_floors() {
        let schedule = LrSchedule::new(0.025, 1000);
        assert!((schedule.lr_at(500) - 0.0125).abs() < 1e-12);
        assert!((schedule.lr_at(0) - 0.025).abs() < 1e-12);
        // Past the end the rate floors at 1e-4 * alpha0.
        assert!((schedule.lr_at(10_000) - 0.025 * 1e-4).abs() < 1e-15);
    }

    fn two_page_fixture() -> (Corpus, Vocabulary, LinkGraph) {
        let corpus = Corpus::from_pages(vec![
            article("A", "a b [[B|x]] c d"),
            article("B", "c a d [[A]] b"),
        ])
        .unwrap();
        let vocab = Vocabulary::build(&corpus, 1).unwrap();
        let graph = LinkGraph::build(&corpus, &vocab);
        (corpus, vocab, graph)
    }

    #[test]
    fn pair_schedule_matches_brute_force_enumeration() {
        let (corpus, vocab, graph) = two_page_fixture();
        let window = 2;
        let (pages, _) = prepare_pages(&corpus, &vocab, window).unwrap();
        let got = page_pairs(&pages[0], &graph, window);

        // Brute force: enumerate the three objective's summands by hand.
        let page = &corpus.pages[0];
        let ids: Vec<Option<SymbolId>> =
            page.tokens.iter().map(|t| vocab.word_id(t)).collect();
        let mut expected = Vec::new();
        for t in 0..ids.len() {
            let Some(target) = ids[t] else { continue };
            for j in -(window as isize)..=(window as isize) {
                if j == 0 {
                    continue;
                }
                let o = t as isize + j;
                if o < 0 || o >= ids.len() as isize {
                    continue;
                }
                if let Some(context) = ids[o as usize] {
                    expected.push(TrainPair {
                        kind: PairKind::Word,
                        target,
                        context,
                    });
                }
            }
        }
        let a = vocab.entity_id("A").unwrap();
        let b = vocab.entity_id("B").unwrap();
        // One anchor (e=B, Q={a, b, c, d}) with window 2 on each side.
        for w in ["a", "b", "c", "d"] {
            expected.push(TrainPair {
                kind: PairKind::Anchor,
                target: b,
                context: vocab.word_id(w).unwrap(),
            });
        }
        // Page A's subject has one incoming link (from B).
        expected.push(TrainPair {
            kind: PairKind::Graph,
            target: a,
            context: b,
        });

        let canon = |mut v: Vec<TrainPair>| {
            v.sort_by_key(|p| (p.kind as u8, p.target, p.context));
            v
        };
        assert_eq!(canon(got), canon(expected));
    }

    #[test]
    fn page_without_anchors_or_inlinks_generates_word_pairs_only() {
        let corpus = Corpus::from_pages(vec![article("Solo", "p q r p q")]).unwrap();
        let vocab = Vocabulary::build(&corpus, 1).unwrap();
        let graph = LinkGraph::build(&corpus, &vocab);
        let (pages, _) = prepare_pages(&corpus, &vocab, 2).unwrap();
        let pairs = page_pairs(&pages[0], &graph, 2);
        assert!(pairs.iter().all(|p| p.kind == PairKind::Word));
        // Window sizes: positions 0..5 with c=2 -> 2+3+4+4+3... for length 5:
        // t=0: 2, t=1: 3, t=2: 4, t=3: 3, t=4: 2 -> 14.
        assert_eq!(pairs.len(), 14);
    }

    #[test]
    fn pair_kinds_route_target_and_context_types() {
        let (corpus, vocab, graph) = two_page_fixture();
        let (pages, _) = prepare_pages(&corpus, &vocab, 2).unwrap();
        for page in &pages {
            for pair in page_pairs(page, &graph, 2) {
                use crate::corpus::SymbolKind::*;
                let kinds = (vocab.kind(pair.target), vocab.kind(pair.context));
                match pair.kind {
                    PairKind::Word => assert_eq!(kinds, (Word, Word)),
                    PairKind::Anchor => assert_eq!(kinds, (Entity, Word)),
                    PairKind::Graph => assert_eq!(kinds, (Entity, Entity)),
                }
            }
        }
    }

    #[test]
    fn single_threaded_training_is_bit_reproducible() {
        let (corpus, vocab, graph) = two_page_fixture();
        let vocab = Arc::new(vocab);
        let config = TrainingConfig {
            dim: 8,
            window: 2,
            negatives: 3,
            epochs: 3,
            min_count: 1,
            seed: 9,
            workers: 1,
            ..TrainingConfig::default()
        };
        let (m1, s1) = train(&corpus, &graph, &vocab, &config).unwrap();
        let (m2, s2) = train(&corpus, &graph, &vocab, &config).unwrap();
        assert_eq!(m1.v_data(), m2.v_data());
        assert_eq!(m1.u_data(), m2.u_data());
        assert_eq!(s1.len(), s2.len());
        for (a, b) in s1.iter().zip(&s2) {
            assert_eq!(a.total_pairs(), b.total_pairs());
            assert_eq!(a.total_objective(), b.total_objective());
        }
        assert!(m1.all_finite());
    }

    #[test]
    fn graph_only_page_touches_entity_rows_only() {
        // Anchor surfaces "zz"/"yy" appear once each and min_count=2 prunes
        // them, so the pages have no in-vocabulary words at all: no word
        // pass, anchor occurrences with empty windows, graph pass only.
        let corpus = Corpus::from_pages(vec![
            article("A", "[[B|zz]]"),
            article("B", "[[A|yy]]"),
        ])
        .unwrap();
        let vocab = Arc::new(Vocabulary::build(&corpus, 2).unwrap());
        assert_eq!(vocab.word_count(), 0);
        let graph = LinkGraph::build(&corpus, &vocab);
        let config = TrainingConfig {
            dim: 4,
            window: 2,
            negatives: 1,
            epochs: 2,
            min_count: 2,
            seed: 1,
            workers: 1,
            ..TrainingConfig::default()
        };
        let init = EmbeddingModel::init(Arc::clone(&vocab), &config).unwrap();
        let before_v = init.v_data().to_vec();
        let (model, stats) = train(&corpus, &graph, &vocab, &config).unwrap();
        assert!(stats.iter().all(|s| s.word_pairs == 0 && s.anchor_pairs == 0));
        assert!(stats.iter().all(|s| s.graph_pairs == 2));
        // No word rows exist here; all rows are entity rows and only they moved.
        assert_ne!(model.v_data(), before_v.as_slice());
    }

    #[test]
    fn mismatched_graph_is_rejected() {
        let (corpus, vocab, _) = two_page_fixture();
        let other = Corpus::from_pages(vec![
            article("X", "q [[Y]] [[Z]]"),
            article("Y", "q r s"),
        ])
        .unwrap();
        let other_vocab = Vocabulary::build(&other, 1).unwrap();
        let foreign_graph = LinkGraph::build(&other, &other_vocab);
        let err = train(
            &corpus,
            &foreign_graph,
            &Arc::new(vocab),
            &TrainingConfig {
                min_count: 1,
                ..TrainingConfig::default()
            },
        );
        assert!(err.is_err());
    }
}

#[cfg(feature = "parallel")]
#[allow(clippy::too_many_arguments)]
fn epoch_parallel(
    pool: &rayon::ThreadPool,
    pages: &[PreparedPage],
    v: &SharedMatrix,
    u: &SharedMatrix,
    graph: &LinkGraph,
    vocab: &Vocabulary,
    config: &TrainingConfig,
    schedule: &LrSchedule,
    visits: &AtomicU64,
    epoch: usize,
) -> Result<EpochStats> {
    use rayon::prelude::*;

    let chunk = pages.len().div_ceil(config.workers).max(1);
    pool.install(|| {
        pages
            .par_chunks(chunk)
            .enumerate()
            .map(|(shard_idx, shard_pages)| {
                let (word_seed, entity_seed) = shard_seeds(config, epoch, shard_idx);
                process_shard(
                    Shard {
                        pages: shard_pages,
                        word_seed,
                        entity_seed,
                    },
                    v,
                    u,
                    graph,
                    vocab,
                    config,
                    schedule,
                    visits,
                )
            })
            .try_reduce(EpochStats::default, |mut a, b| {
                a.merge(&b);
                Ok(a)
            })
    })
}
