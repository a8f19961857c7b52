//! The mention dictionary: surface form -> ranked candidate entities.

use std::collections::{BTreeSet, HashMap};
use std::io::{BufRead, BufReader, Read, Write};

use crate::corpus::{fold_surface, fold_title, AnchorStatistics, Corpus, SymbolId, Vocabulary};
use crate::error::{Error, Result};

/// Candidate lists are truncated to this many entries, keeping the largest
/// entity priors.
pub const MAX_CANDIDATES_PER_SURFACE: usize = 50;

/// One candidate entity for a surface, with the `|A_{e,m}|` anchor count.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Candidate {
    pub entity: SymbolId,
    pub anchor_count: u64,
}

/// Maps case-folded surfaces to candidate entities gathered from entity
/// page titles, redirect titles, and anchor surfaces. Candidate lists are
/// sorted by entity prior descending and truncated to
/// [`MAX_CANDIDATES_PER_SURFACE`]. The dictionary also carries the anchor
/// count marginals needed for `P(e|m)` and `P(e)` at disambiguation time.
#[derive(Debug, Clone, Default)]
pub struct MentionDictionary {
    entries: HashMap<String, Vec<Candidate>>,
    surface_totals: HashMap<String, u64>,
    entity_totals: HashMap<SymbolId, u64>,
    total_anchors: u64,
}

impl MentionDictionary {
    pub fn build(corpus: &Corpus, stats: &AnchorStatistics, vocab: &Vocabulary) -> Self {
        // Candidate sets per surface, from the three sources.
        let mut sets: HashMap<String, BTreeSet<SymbolId>> = HashMap::new();
        for page in corpus.articles() {
            if let Some(e) = vocab.entity_id(&page.id) {
                sets.entry(fold_title(&page.id)).or_default().insert(e);
            }
        }
        for (source, target) in corpus.redirects() {
            if let Some(e) = vocab.entity_id(target) {
                sets.entry(fold_title(source)).or_default().insert(e);
            }
        }
        for (surface, entity, _) in stats.pairs() {
            sets.entry(surface.to_string()).or_default().insert(entity);
        }

        let mut entity_totals = HashMap::new();
        for e in vocab.entity_ids() {
            let c = stats.entity_count(e);
            if c > 0 {
                entity_totals.insert(e, c);
            }
        }

        let mut entries = HashMap::with_capacity(sets.len());
        let mut surface_totals = HashMap::new();
        for (surface, set) in sets {
            let mut list: Vec<Candidate> = set
                .into_iter()
                .map(|entity| Candidate {
                    entity,
                    anchor_count: stats.pair_count(&surface, entity),
                })
                .collect();
            list.sort_by(|a, b| {
                stats
                    .entity_count(b.entity)
                    .cmp(&stats.entity_count(a.entity))
                    .then_with(|| vocab.symbol(a.entity).cmp(vocab.symbol(b.entity)))
            });
            list.truncate(MAX_CANDIDATES_PER_SURFACE);
            let total = stats.surface_count(&surface);
            if total > 0 {
                surface_totals.insert(surface.clone(), total);
            }
            entries.insert(surface, list);
        }

        MentionDictionary {
            entries,
            surface_totals,
            entity_totals,
            total_anchors: stats.total(),
        }
    }

    /// Ranked candidates for a (raw) surface; empty when unknown.
    pub fn candidates(&self, surface: &str) -> &[Candidate] {
        self.entries
            .get(&fold_surface(surface))
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    /// `P(e|m)` from the stored anchor counts; 0 when the surface was never
    /// seen as an anchor or the entity is not among its candidates.
    pub fn prior_probability(&self, surface: &str, entity: SymbolId) -> f64 {
        let folded = fold_surface(surface);
        let Some(&total) = self.surface_totals.get(&folded) else {
            return 0.0;
        };
        let count = self
            .entries
            .get(&folded)
            .and_then(|list| list.iter().find(|c| c.entity == entity))
            .map(|c| c.anchor_count)
            .unwrap_or(0);
        count as f64 / total as f64
    }

    /// `P(e)` over all anchors in the corpus.
    pub fn entity_prior(&self, entity: SymbolId) -> f64 {
        if self.total_anchors == 0 {
            return 0.0;
        }
        self.entity_totals.get(&entity).copied().unwrap_or(0) as f64 / self.total_anchors as f64
    }

    pub fn surface_count(&self) -> usize {
        self.entries.len()
    }

    pub fn total_anchors(&self) -> u64 {
        self.total_anchors
    }

    /// Writes the dictionary TSV: header, `#total`, entity rows `E`,
    /// surface-total rows `S`, and candidate rows `C` in rank order.
    pub fn write_tsv<W: Write>(&self, mut w: W, vocab: &Vocabulary) -> Result<()> {
        writeln!(w, "#dict v1")?;
        writeln!(w, "#total\t{}", self.total_anchors)?;
        let mut entities: Vec<(&str, u64)> = self
            .entity_totals
            .iter()
            .map(|(&e, &c)| (vocab.symbol(e), c))
            .collect();
        entities.sort_unstable();
        for (symbol, count) in entities {
            writeln!(w, "E\t{symbol}\t{count}")?;
        }
        let mut surfaces: Vec<(&str, u64)> = self
            .surface_totals
            .iter()
            .map(|(s, &c)| (s.as_str(), c))
            .collect();
        surfaces.sort_unstable();
        for (surface, count) in surfaces {
            writeln!(w, "S\t{surface}\t{count}")?;
        }
        let mut keys: Vec<&String> = self.entries.keys().collect();
        keys.sort_unstable();
        for surface in keys {
            for c in &self.entries[surface] {
                writeln!(
                    w,
                    "C\t{surface}\t{}\t{}",
                    vocab.symbol(c.entity),
                    c.anchor_count
                )?;
            }
        }
        Ok(())
    }

    /// Reads a dictionary TSV, binding entities against `vocab`. Candidate
    /// order in the file is the ranking.
    pub fn read_tsv<R: Read>(reader: R, vocab: &Vocabulary) -> Result<Self> {
        let mut lines = BufReader::new(reader).lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::format("empty dictionary file"))??;
        if header.trim() != "#dict v1" {
            return Err(Error::format(format!(
                "unsupported dictionary header '{header}', expected '#dict v1'"
            )));
        }
        let mut dict = MentionDictionary::default();
        let entity = |symbol: &str, line: usize| {
            vocab.entity_id(symbol).ok_or_else(|| {
                Error::line(line, format!("entity '{symbol}' is not in the vocabulary"))
            })
        };
        for (idx, line) in lines.enumerate() {
            let line_no = idx + 2;
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            match fields.as_slice() {
                ["#total", n] => {
                    dict.total_anchors = n
                        .parse()
                        .map_err(|_| Error::line(line_no, "invalid total"))?;
                }
                ["E", symbol, count] => {
                    let e = entity(symbol, line_no)?;
                    let count: u64 = count
                        .parse()
                        .map_err(|_| Error::line(line_no, "invalid entity count"))?;
                    dict.entity_totals.insert(e, count);
                }
                ["S", surface, count] => {
                    let count: u64 = count
                        .parse()
                        .map_err(|_| Error::line(line_no, "invalid surface count"))?;
                    dict.surface_totals.insert(surface.to_string(), count);
                }
                ["C", surface, symbol, count] => {
                    let e = entity(symbol, line_no)?;
                    let count: u64 = count
                        .parse()
                        .map_err(|_| Error::line(line_no, "invalid candidate count"))?;
                    let list = dict.entries.entry(surface.to_string()).or_default();
                    if list.len() >= MAX_CANDIDATES_PER_SURFACE {
                        return Err(Error::line(
                            line_no,
                            format!("surface '{surface}' has more than {MAX_CANDIDATES_PER_SURFACE} candidates"),
                        ));
                    }
                    list.push(Candidate {
                        entity: e,
                        anchor_count: count,
                    });
                }
                _ => return Err(Error::line(line_no, "unrecognized dictionary row")),
            }
        }
        Ok(dict)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::testutil::{article, redirect};
    use crate::corpus::Corpus;

    fn fixture() -> (Corpus, Vocabulary, AnchorStatistics) {
        let corpus = Corpus::from_pages(vec![
            article("Paris", "the capital"),
            article("NYC", "the big city [[Paris|paris]]"),
            article("Doc", "[[NYC|ny]] and [[NY_State|ny]] and [[NYC|ny]] again [[NYC|ny]]"),
            article("NY_State", "a state"),
            redirect("Big_Apple", "NYC"),
        ])
        .unwrap();
        let vocab = Vocabulary::build(&corpus, 1).unwrap();
        let (stats, _) = AnchorStatistics::build(&corpus, &vocab);
        (corpus, vocab, stats)
    }

    #[test]
    fn title_source_maps_surface_to_entity() {
        let (corpus, vocab, stats) = fixture();
        let dict = MentionDictionary::build(&corpus, &stats, &vocab);
        let cands = dict.candidates("Paris");
        assert_eq!(cands.len(), 1);
        assert_eq!(cands[0].entity, vocab.entity_id("Paris").unwrap());
    }

    #[test]
    fn redirect_source_maps_to_target() {
        let (corpus, vocab, stats) = fixture();
        let dict = MentionDictionary::build(&corpus, &stats, &vocab);
        let cands = dict.candidates("big apple");
        assert_eq!(cands.len(), 1);
        assert_eq!(cands[0].entity, vocab.entity_id("NYC").unwrap());
    }

    #[test]
    fn anchor_candidates_are_ranked_by_entity_prior() {
        let (corpus, vocab, stats) = fixture();
        let dict = MentionDictionary::build(&corpus, &stats, &vocab);
        let nyc = vocab.entity_id("NYC").unwrap();
        let state = vocab.entity_id("NY_State").unwrap();
        let cands = dict.candidates("ny");
        assert_eq!(cands.len(), 2);
        // NYC has 3 anchors overall, NY_State 1: NYC ranks first.
        assert_eq!(cands[0].entity, nyc);
        assert_eq!(cands[0].anchor_count, 3);
        assert_eq!(cands[1].entity, state);
        assert_eq!(dict.prior_probability("ny", nyc), 0.75);
        assert_eq!(dict.prior_probability("NY", nyc), 0.75, "case folded lookup");
        assert_eq!(dict.entity_prior(nyc), 3.0 / 5.0);
    }

    #[test]
    fn truncates_to_top_candidates_by_prior() {
        // 60 entities share one surface; entity k gets k+1 anchors.
        let mut pages = vec![];
        let mut text = String::new();
        for k in 0..60 {
            pages.push(article(&format!("E{k:02}"), "entity page"));
            for _ in 0..=k {
                text.push_str(&format!("[[E{k:02}|shared]] "));
            }
        }
        pages.push(article("Host", &text));
        let corpus = Corpus::from_pages(pages).unwrap();
        let vocab = Vocabulary::build(&corpus, 1).unwrap();
        let (stats, _) = AnchorStatistics::build(&corpus, &vocab);
        let dict = MentionDictionary::build(&corpus, &stats, &vocab);
        let cands = dict.candidates("shared");
        assert_eq!(cands.len(), MAX_CANDIDATES_PER_SURFACE);
        // The 50 kept are those with the largest priors: E59 down to E10.
        assert_eq!(cands[0].entity, vocab.entity_id("E59").unwrap());
        assert!(cands
            .iter()
            .all(|c| { c.anchor_count >= 11 }));
        // Priors over the truncated list sum below 1.
        let sum: f64 = cands
            .iter()
            .map(|c| dict.prior_probability("shared", c.entity))
            .sum();
        assert!(sum < 1.0);
    }

    #[test]
    fn tsv_round_trip_is_lossless() {
        let (corpus, vocab, stats) = fixture();
        let dict = MentionDictionary::build(&corpus, &stats, &vocab);
        let mut buf = Vec::new();
        dict.write_tsv(&mut buf, &vocab).unwrap();
        let loaded = MentionDictionary::read_tsv(buf.as_slice(), &vocab).unwrap();
        assert_eq!(loaded.total_anchors(), dict.total_anchors());
        assert_eq!(loaded.surface_count(), dict.surface_count());
        for surface in dict.entries.keys() {
            assert_eq!(loaded.candidates(surface), dict.candidates(surface), "{surface}");
            assert_eq!(
                loaded.surface_totals.get(surface),
                dict.surface_totals.get(surface)
            );
        }
        let mut buf2 = Vec::new();
        loaded.write_tsv(&mut buf2, &vocab).unwrap();
        assert_eq!(buf, buf2, "byte-stable re-serialization");
    }

    #[test]
    fn unknown_entity_in_file_is_rejected() {
        let (_, vocab, _) = fixture();
        let data = "#dict v1\n#total\t1\nC\tx\tNoSuchEntity\t1\n";
        assert!(MentionDictionary::read_tsv(data.as_bytes(), &vocab).is_err());
    }
}
