use std::sync::Arc;
use jwee_core::corpus::{LinkGraph, Vocabulary};
use jwee_core::embedding::{train, TrainingConfig};
use jwee_core::synth::{cluster_corpus, ClusterCorpusSpec};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let alpha: f64 = args[1].parse().unwrap();
    let dim: usize = args[2].parse().unwrap();
    let tokens: usize = args[3].parse().unwrap();
    let words: usize = args[4].parse().unwrap();
    let negs: usize = args[5].parse().unwrap();
    let seed: u64 = args[6].parse().unwrap();

    let wiki = cluster_corpus(&ClusterCorpusSpec {
        clusters: 4,
        entities_per_cluster: 50,
        words_per_cluster: words,
        tokens_per_page: tokens,
        anchors_per_page: 3,
        seed: 42,
    });
    let vocab = Arc::new(Vocabulary::build(&wiki.corpus, 5).unwrap());
    let graph = LinkGraph::build(&wiki.corpus, &vocab);
    let config = TrainingConfig {
        dim, window: 3, negatives: negs, alpha0: alpha,
        epochs: 10, min_count: 5, seed, workers: 1,
    };
    let t0 = std::time::Instant::now();
    let (_, stats) = train(&wiki.corpus, &graph, &vocab, &config).unwrap();
    let totals: Vec<f64> = stats.iter().map(|s| s.total_objective()).collect();
    let mut ok = true;
    for w in totals.windows(2) { if w[1] < w[0] { ok = false; } }
    println!("alpha={alpha} d={dim} tok={tokens} w={words} g={negs} seed={seed} mono={ok} t={:?}", t0.elapsed());
    for (i, t) in totals.iter().enumerate() {
        let delta = if i > 0 { t - totals[i-1] } else { 0.0 };
        println!("  epoch {i}: {t:.1} (delta {delta:+.1})");
    }
}
