//! Deterministic synthetic corpora and document sets.
//!
//! Two families of fixtures:
//!
//! * cluster corpora — entities and words partitioned into topical
//!   clusters, with intra-cluster links and topical page text; used to
//!   check that training pulls same-cluster items together.
//! * NED fixtures — a cluster-style knowledge base plus annotated
//!   documents whose ambiguous mentions have priors pointing the wrong way
//!   for half the documents, so they are only resolvable through textual
//!   context and coherence.

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::{parse_annotated_text, Corpus, Page};
use crate::ned::{Document, Mention};
use crate::similarity::RelatednessQuery;

const TOPIC_PREFIXES: [&str; 6] = ["aster", "borok", "cedra", "dulin", "ehvot", "farn"];

/// Shape of a cluster corpus.
#[derive(Debug, Clone)]
pub struct ClusterCorpusSpec {
    pub clusters: usize,
    pub entities_per_cluster: usize,
    pub words_per_cluster: usize,
    pub tokens_per_page: usize,
    pub anchors_per_page: usize,
    pub seed: u64,
}

impl Default for ClusterCorpusSpec {
    fn default() -> Self {
        ClusterCorpusSpec {
            clusters: 2,
            entities_per_cluster: 8,
            words_per_cluster: 20,
            tokens_per_page: 80,
            anchors_per_page: 3,
            seed: 7,
        }
    }
}

/// A generated cluster corpus with its ground-truth partition.
pub struct ClusterCorpus {
    pub corpus: Corpus,
    /// Entity ids per cluster.
    pub entity_clusters: Vec<Vec<String>>,
    /// Word tokens per cluster.
    pub word_clusters: Vec<Vec<String>>,
}

fn entity_name(cluster: usize, index: usize) -> String {
    let prefix = TOPIC_PREFIXES[cluster % TOPIC_PREFIXES.len()];
    let mut name = prefix.to_string();
    name[..1].make_ascii_uppercase();
    format!("{name}{index}")
}

fn word_name(cluster: usize, index: usize) -> String {
    format!("{}w{index:02}", TOPIC_PREFIXES[cluster % TOPIC_PREFIXES.len()])
}

/// Generates a cluster corpus: one page per entity, filled with its
/// cluster's words and anchors to other entities of the same cluster.
pub fn cluster_corpus(spec: &ClusterCorpusSpec) -> ClusterCorpus {
    assert!(spec.clusters >= 1 && spec.entities_per_cluster >= 2);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let entity_clusters: Vec<Vec<String>> = (0..spec.clusters)
        .map(|c| (0..spec.entities_per_cluster).map(|i| entity_name(c, i)).collect())
        .collect();
    let word_clusters: Vec<Vec<String>> = (0..spec.clusters)
        .map(|c| (0..spec.words_per_cluster).map(|i| word_name(c, i)).collect())
        .collect();

    let mut pages = Vec::new();
    for c in 0..spec.clusters {
        for i in 0..spec.entities_per_cluster {
            let id = &entity_clusters[c][i];
            let words = &word_clusters[c];
            let mut parts: Vec<String> = (0..spec.tokens_per_page)
                .map(|_| words[rng.gen_range(0..words.len())].clone())
                .collect();
            for _ in 0..spec.anchors_per_page {
                let target = loop {
                    let t = &entity_clusters[c][rng.gen_range(0..spec.entities_per_cluster)];
                    if t != id {
                        break t;
                    }
                };
                let at = rng.gen_range(0..=parts.len());
                parts.insert(at, format!("[[{target}]]"));
            }
            let text = parts.join(" ");
            let (tokens, anchors) = parse_annotated_text(&text);
            pages.push(Page {
                id: id.clone(),
                tokens,
                anchors,
                redirect: None,
            });
        }
    }
    ClusterCorpus {
        corpus: Corpus::from_pages(pages).expect("generated ids are unique"),
        entity_clusters,
        word_clusters,
    }
}

/// A generic mini-wiki with roughly `pages` pages spread over four topical
/// clusters.
pub fn mini_wiki(pages: usize, seed: u64) -> ClusterCorpus {
    let clusters = 4;
    cluster_corpus(&ClusterCorpusSpec {
        clusters,
        entities_per_cluster: pages.div_ceil(clusters).max(2),
        words_per_cluster: 30,
        tokens_per_page: 60,
        anchors_per_page: 3,
        seed,
    })
}

/// Relatedness queries for a cluster corpus: every entity against all other
/// same-cluster entities (relevant) and as many other-cluster entities
/// (irrelevant).
pub fn relatedness_queries(fixture: &ClusterCorpus) -> Vec<RelatednessQuery> {
    let mut queries = Vec::new();
    let clusters = &fixture.entity_clusters;
    for (c, members) in clusters.iter().enumerate() {
        let others: Vec<&String> = clusters
            .iter()
            .enumerate()
            .filter(|&(o, _)| o != c)
            .flat_map(|(_, m)| m.iter())
            .collect();
        for (i, target) in members.iter().enumerate() {
            let mut candidates = Vec::new();
            let mut labels = Vec::new();
            for (j, peer) in members.iter().enumerate() {
                if i != j {
                    candidates.push(peer.clone());
                    labels.push(1);
                }
            }
            let take = candidates.len().min(others.len());
            for peer in others.iter().take(take) {
                candidates.push((*peer).clone());
                labels.push(0);
            }
            queries.push(RelatednessQuery {
                target: target.clone(),
                candidates,
                labels,
            });
        }
    }
    queries
}

/// Shape of an end-to-end NED fixture.
#[derive(Debug, Clone)]
pub struct NedFixtureSpec {
    /// Plain (unambiguously named) entities per topic.
    pub plain_entities_per_topic: usize,
    /// Shared surfaces, each mapping to one entity per topic.
    pub ambiguous_surfaces: usize,
    pub words_per_topic: usize,
    pub generic_words: usize,
    pub kb_tokens_per_page: usize,
    pub train_docs: usize,
    pub test_docs: usize,
    pub seed: u64,
}

impl Default for NedFixtureSpec {
    fn default() -> Self {
        NedFixtureSpec {
            plain_entities_per_topic: 6,
            ambiguous_surfaces: 6,
            words_per_topic: 20,
            generic_words: 12,
            kb_tokens_per_page: 70,
            train_docs: 40,
            test_docs: 30,
            seed: 11,
        }
    }
}

/// A generated NED fixture: the knowledge-base corpus, gold-annotated
/// training documents, and test documents.
pub struct NedFixture {
    pub corpus: Corpus,
    pub train_docs: Vec<Document>,
    pub test_docs: Vec<Document>,
}

/// The two topics used by [`ned_fixture`].
const NED_TOPICS: usize = 2;

fn ambiguous_entity(surface_idx: usize, topic: usize) -> String {
    format!("Amb{surface_idx}{}", ["A", "B"][topic])
}

fn ambiguous_surface(surface_idx: usize) -> String {
    format!("amb{surface_idx}")
}

/// Builds the fixture. Ambiguous surface `amb<j>` points to `Amb<j>A`
/// (topic 0) three times and `Amb<j>B` (topic 1) once in the KB, so the
/// prior always prefers the topic-0 entity; topic-1 documents are only
/// solvable through context. Half the documents are "sparse": their filler
/// text is generic plus a little cross-topic noise, so textual context
/// alone is weak and coherence with the unambiguous mentions has to carry
/// the decision.
pub fn ned_fixture(spec: &NedFixtureSpec) -> NedFixture {
    assert!(spec.plain_entities_per_topic >= 3);
    assert!(spec.ambiguous_surfaces >= 2);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let plain: Vec<Vec<String>> = (0..NED_TOPICS)
        .map(|t| {
            (0..spec.plain_entities_per_topic)
                .map(|i| entity_name(t, i))
                .collect()
        })
        .collect();
    let topic_words: Vec<Vec<String>> = (0..NED_TOPICS)
        .map(|t| (0..spec.words_per_topic).map(|i| word_name(t, i)).collect())
        .collect();
    let generic: Vec<String> = (0..spec.generic_words).map(|i| format!("genw{i:02}")).collect();

    // Assign each ambiguous surface's anchors to hosting pages: three on
    // topic-0 plain pages, one on a topic-1 plain page.
    let mut hosted_anchors: Vec<Vec<String>> =
        vec![Vec::new(); NED_TOPICS * spec.plain_entities_per_topic];
    let host_index = |topic: usize, i: usize| topic * spec.plain_entities_per_topic + i;
    for j in 0..spec.ambiguous_surfaces {
        for k in 0..3 {
            let host = (j + k) % spec.plain_entities_per_topic;
            hosted_anchors[host_index(0, host)]
                .push(format!("[[{}|{}]]", ambiguous_entity(j, 0), ambiguous_surface(j)));
        }
        let host = j % spec.plain_entities_per_topic;
        hosted_anchors[host_index(1, host)]
            .push(format!("[[{}|{}]]", ambiguous_entity(j, 1), ambiguous_surface(j)));
    }

    let mut pages = Vec::new();
    let mut page_of = |id: String, topic: usize, extra_anchors: Vec<String>, rng: &mut ChaCha8Rng| {
        let words = &topic_words[topic];
        let mut parts: Vec<String> = (0..spec.kb_tokens_per_page)
            .map(|_| {
                if rng.gen_bool(0.3) {
                    generic[rng.gen_range(0..generic.len())].clone()
                } else {
                    words[rng.gen_range(0..words.len())].clone()
                }
            })
            .collect();
        // Anchor every plain same-topic entity at least once somewhere:
        // here, two random peers per page plus this page's hosted anchors.
        for _ in 0..2 {
            let peer = loop {
                let p = &plain[topic][rng.gen_range(0..spec.plain_entities_per_topic)];
                if *p != id {
                    break p;
                }
            };
            let at = rng.gen_range(0..=parts.len());
            parts.insert(at, format!("[[{peer}]]"));
        }
        for anchor in extra_anchors {
            let at = rng.gen_range(0..=parts.len());
            parts.insert(at, anchor);
        }
        let text = parts.join(" ");
        let (tokens, anchors) = parse_annotated_text(&text);
        pages.push(Page {
            id,
            tokens,
            anchors,
            redirect: None,
        });
    };

    for t in 0..NED_TOPICS {
        for i in 0..spec.plain_entities_per_topic {
            let id = plain[t][i].clone();
            let extra = hosted_anchors[host_index(t, i)].clone();
            page_of(id, t, extra, &mut rng);
        }
        for j in 0..spec.ambiguous_surfaces {
            page_of(ambiguous_entity(j, t), t, Vec::new(), &mut rng);
        }
    }
    let corpus = Corpus::from_pages(pages).expect("generated ids are unique");

    let mut make_docs = |count: usize, tag: &str, rng: &mut ChaCha8Rng| -> Vec<Document> {
        (0..count)
            .map(|n| {
                let topic = n % NED_TOPICS;
                let sparse = (n / NED_TOPICS) % 2 == 1;
                let other = 1 - topic;

                let mut filler: Vec<String> = if sparse {
                    let mut f: Vec<String> = (0..16)
                        .map(|_| generic[rng.gen_range(0..generic.len())].clone())
                        .collect();
                    for _ in 0..3 {
                        f.push(topic_words[other][rng.gen_range(0..spec.words_per_topic)].clone());
                    }
                    f
                } else {
                    let mut f: Vec<String> = (0..14)
                        .map(|_| topic_words[topic][rng.gen_range(0..spec.words_per_topic)].clone())
                        .collect();
                    for _ in 0..6 {
                        f.push(generic[rng.gen_range(0..generic.len())].clone());
                    }
                    f
                };
                filler.shuffle(rng);

                // Three unambiguous mentions (plain entities of the topic)
                // and two ambiguous ones.
                let mut plain_pick: Vec<usize> = (0..spec.plain_entities_per_topic).collect();
                plain_pick.shuffle(rng);
                let mut amb_pick: Vec<usize> = (0..spec.ambiguous_surfaces).collect();
                amb_pick.shuffle(rng);

                enum Item {
                    Filler(String),
                    Mention { surface: String, gold: String },
                }
                let mut items: Vec<Item> = filler.into_iter().map(Item::Filler).collect();
                let mut insert = |items: &mut Vec<Item>, surface: String, gold: String, rng: &mut ChaCha8Rng| {
                    let at = rng.gen_range(0..=items.len());
                    items.insert(at, Item::Mention { surface, gold });
                };
                for &i in plain_pick.iter().take(3) {
                    let id = plain[topic][i].clone();
                    insert(&mut items, id.to_lowercase(), id, rng);
                }
                for &j in amb_pick.iter().take(2) {
                    insert(
                        &mut items,
                        ambiguous_surface(j),
                        ambiguous_entity(j, topic),
                        rng,
                    );
                }

                let mut tokens: Vec<String> = Vec::new();
                let mut mentions = Vec::new();
                for item in items {
                    match item {
                        Item::Filler(w) => tokens.push(w),
                        Item::Mention { surface, gold } => {
                            let start = tokens.len();
                            let surface_tokens = crate::corpus::tokenize(&surface);
                            tokens.extend(surface_tokens);
                            mentions.push(Mention {
                                surface,
                                span: start..tokens.len(),
                                gold: Some(gold),
                            });
                        }
                    }
                }
                let text = tokens.join(" ");
                Document::new(format!("{tag}{n:03}"), text, mentions)
                    .expect("generated spans are valid")
            })
            .collect()
    };

    let train_docs = make_docs(spec.train_docs, "train", &mut rng);
    let test_docs = make_docs(spec.test_docs, "test", &mut rng);
    NedFixture {
        corpus,
        train_docs,
        test_docs,
    }
}

/// Serializes a corpus back to the JSON-lines format (for CLI fixtures).
pub fn corpus_to_jsonl(fixture: &Corpus) -> String {
    use serde_json::json;
    let mut out = String::new();
    for page in &fixture.pages {
        let line = match &page.redirect {
            Some(target) => json!({"id": page.id, "redirect": target}),
            None => {
                // Re-inline anchors into the token stream.
                let mut parts: Vec<String> = Vec::new();
                let mut pos = 0usize;
                let mut anchors = page.anchors.iter().peekable();
                while pos <= page.tokens.len() {
                    while let Some(a) = anchors.peek() {
                        if a.span.start == pos {
                            let a = anchors.next().unwrap();
                            if a.surface == a.target {
                                parts.push(format!("[[{}]]", a.target));
                            } else {
                                parts.push(format!("[[{}|{}]]", a.target, a.surface));
                            }
                            pos = pos.max(a.span.end);
                        } else {
                            break;
                        }
                    }
                    if pos < page.tokens.len() {
                        parts.push(page.tokens[pos].clone());
                    }
                    pos += 1;
                }
                json!({"id": page.id, "text": parts.join(" ")})
            }
        };
        out.push_str(&line.to_string());
        out.push('\n');
    }
    out
}

/// Serializes documents to the JSON-lines dataset format.
pub fn documents_to_jsonl(docs: &[Document]) -> String {
    use serde_json::json;
    let mut out = String::new();
    for doc in docs {
        let mentions: Vec<_> = doc
            .mentions
            .iter()
            .map(|m| {
                json!({
                    "surface": m.surface,
                    "start_token": m.span.start,
                    "end_token": m.span.end,
                    "gold": m.gold,
                })
            })
            .collect();
        out.push_str(
            &json!({"doc_id": doc.doc_id, "text": doc.text, "mentions": mentions}).to_string(),
        );
        out.push('\n');
    }
    out
}
