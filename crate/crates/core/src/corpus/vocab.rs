//! The joint word/entity vocabulary.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Read, Write};

use crate::error::{Error, Result};

use super::Corpus;

/// Dense id into the joint word+entity space. Word ids occupy
/// `0..word_count`, entity ids `word_count..word_count + entity_count`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SymbolId(pub(crate) u32);

impl SymbolId {
    pub fn index(self) -> usize {
        self.0 as usize
    }

    /// Builds an id from a dense index (matrix row, file offset). Callers
    /// are responsible for the index being meaningful in their vocabulary.
    pub fn from_index(index: usize) -> Self {
        SymbolId(index as u32)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SymbolKind {
    Word,
    Entity,
}

impl SymbolKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SymbolKind::Word => "word",
            SymbolKind::Entity => "entity",
        }
    }
}

#[derive(Debug, Clone)]
struct VocabEntry {
    symbol: String,
    count: u64,
}

/// Bidirectional symbol <-> id map with frequency counts.
///
/// Words are lowercased tokens with corpus frequency at least `min_count`;
/// entities are article subjects plus redirect-resolved anchor targets.
/// Word counts are token frequencies, entity counts are the number of
/// anchors referring to the entity.
#[derive(Debug, Clone)]
pub struct Vocabulary {
    words: Vec<VocabEntry>,
    entities: Vec<VocabEntry>,
    word_index: HashMap<String, u32>,
    entity_index: HashMap<String, u32>,
    total_tokens: u64,
}

impl Vocabulary {
    /// Builds the vocabulary from a corpus, keeping words whose frequency is
    /// at least `min_count` (inclusive).
    pub fn build(corpus: &Corpus, min_count: u64) -> Result<Self> {
        if min_count < 1 {
            return Err(Error::config("min_count must be >= 1"));
        }
        if corpus.articles().next().is_none() {
            return Err(Error::data("empty corpus"));
        }

        let mut word_counts: HashMap<&str, u64> = HashMap::new();
        let mut entity_counts: HashMap<&str, u64> = HashMap::new();
        let mut total_tokens = 0u64;

        for page in corpus.articles() {
            entity_counts.entry(page.id.as_str()).or_insert(0);
            total_tokens += page.tokens.len() as u64;
            for token in &page.tokens {
                *word_counts.entry(token.as_str()).or_insert(0) += 1;
            }
            for anchor in &page.anchors {
                if let Some(target) = corpus.resolve_target(&anchor.target) {
                    *entity_counts.entry(target).or_insert(0) += 1;
                }
            }
        }

        let mut words: Vec<VocabEntry> = word_counts
            .into_iter()
            .filter(|&(_, count)| count >= min_count)
            .map(|(symbol, count)| VocabEntry {
                symbol: symbol.to_string(),
                count,
            })
            .collect();
        let mut entities: Vec<VocabEntry> = entity_counts
            .into_iter()
            .map(|(symbol, count)| VocabEntry {
                symbol: symbol.to_string(),
                count,
            })
            .collect();
        // Deterministic dense ids: frequency-descending, symbol ascending.
        words.sort_by(|a, b| b.count.cmp(&a.count).then_with(|| a.symbol.cmp(&b.symbol)));
        entities.sort_by(|a, b| b.count.cmp(&a.count).then_with(|| a.symbol.cmp(&b.symbol)));

        Ok(Self::from_parts(words, entities, total_tokens))
    }

    /// Rebuilds a vocabulary from (symbol, count) lists already in id order,
    /// as stored in the embedding file format.
    pub(crate) fn from_symbol_lists(
        words: Vec<(String, u64)>,
        entities: Vec<(String, u64)>,
    ) -> Self {
        let to_entries = |list: Vec<(String, u64)>| {
            list.into_iter()
                .map(|(symbol, count)| VocabEntry { symbol, count })
                .collect::<Vec<_>>()
        };
        let words = to_entries(words);
        let entities = to_entries(entities);
        let total = words.iter().map(|e| e.count).sum();
        Self::from_parts(words, entities, total)
    }

    fn from_parts(words: Vec<VocabEntry>, entities: Vec<VocabEntry>, total_tokens: u64) -> Self {
        let word_index = words
            .iter()
            .enumerate()
            .map(|(i, e)| (e.symbol.clone(), i as u32))
            .collect();
        let entity_index = entities
            .iter()
            .enumerate()
            .map(|(i, e)| (e.symbol.clone(), i as u32))
            .collect();
        Vocabulary {
            words,
            entities,
            word_index,
            entity_index,
            total_tokens,
        }
    }

    pub fn word_count(&self) -> usize {
        self.words.len()
    }

    pub fn entity_count(&self) -> usize {
        self.entities.len()
    }

    /// Total number of symbols; also the row count of the embedding matrices.
    pub fn len(&self) -> usize {
        self.words.len() + self.entities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Total tokens seen during ingestion (including pruned words).
    pub fn total_tokens(&self) -> u64 {
        self.total_tokens
    }

    pub fn word_id(&self, word: &str) -> Option<SymbolId> {
        self.word_index.get(word).map(|&i| SymbolId(i))
    }

    pub fn entity_id(&self, entity: &str) -> Option<SymbolId> {
        self.entity_index
            .get(entity)
            .map(|&i| SymbolId(self.words.len() as u32 + i))
    }

    pub fn contains(&self, id: SymbolId) -> bool {
        id.index() < self.len()
    }

    pub fn kind(&self, id: SymbolId) -> SymbolKind {
        if id.index() < self.words.len() {
            SymbolKind::Word
        } else {
            SymbolKind::Entity
        }
    }

    pub fn symbol(&self, id: SymbolId) -> &str {
        &self.entry(id).symbol
    }

    pub fn count(&self, id: SymbolId) -> u64 {
        self.entry(id).count
    }

    fn entry(&self, id: SymbolId) -> &VocabEntry {
        let i = id.index();
        if i < self.words.len() {
            &self.words[i]
        } else {
            &self.entities[i - self.words.len()]
        }
    }

    /// All word ids in id order.
    pub fn word_ids(&self) -> impl Iterator<Item = SymbolId> + '_ {
        (0..self.words.len() as u32).map(SymbolId)
    }

    /// All entity ids in id order.
    pub fn entity_ids(&self) -> impl Iterator<Item = SymbolId> + '_ {
        let base = self.words.len() as u32;
        (0..self.entities.len() as u32).map(move |i| SymbolId(base + i))
    }

    /// Word frequency counts in id order, used for the negative-sampling
    /// distribution.
    pub fn word_counts(&self) -> impl Iterator<Item = u64> + '_ {
        self.words.iter().map(|e| e.count)
    }

    /// Offset of an entity id within the entity block, if it is one.
    pub(crate) fn entity_offset(&self, id: SymbolId) -> Option<usize> {
        let i = id.index();
        (i >= self.words.len() && i < self.len()).then(|| i - self.words.len())
    }

    /// Writes the vocabulary as TSV: a `#vocab v1` header followed by
    /// `kind<TAB>symbol<TAB>count` rows in id order.
    pub fn write_tsv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "#vocab v1")?;
        for e in &self.words {
            writeln!(w, "word\t{}\t{}", e.symbol, e.count)?;
        }
        for e in &self.entities {
            writeln!(w, "entity\t{}\t{}", e.symbol, e.count)?;
        }
        Ok(())
    }

    /// Reads a vocabulary TSV written by [`Vocabulary::write_tsv`]. Ids are
    /// assigned in file order per kind; `total_tokens` is reconstructed as
    /// the sum of word counts.
    pub fn read_tsv<R: Read>(reader: R) -> Result<Self> {
        let mut lines = BufReader::new(reader).lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::format("empty vocabulary file"))??;
        if header.trim() != "#vocab v1" {
            return Err(Error::format(format!(
                "unsupported vocabulary header '{header}', expected '#vocab v1'"
            )));
        }
        let mut words = Vec::new();
        let mut entities = Vec::new();
        for (idx, line) in lines.enumerate() {
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let mut parts = line.splitn(3, '\t');
            let (kind, symbol, count) = match (parts.next(), parts.next(), parts.next()) {
                (Some(k), Some(s), Some(c)) => (k, s, c),
                _ => return Err(Error::line(idx + 2, "expected kind<TAB>symbol<TAB>count")),
            };
            let count: u64 = count
                .parse()
                .map_err(|_| Error::line(idx + 2, format!("invalid count '{count}'")))?;
            let entry = VocabEntry {
                symbol: symbol.to_string(),
                count,
            };
            match kind {
                "word" => words.push(entry),
                "entity" => entities.push(entry),
                other => {
                    return Err(Error::line(idx + 2, format!("unknown symbol kind '{other}'")))
                }
            }
        }
        let total = words.iter().map(|e| e.count).sum();
        Ok(Self::from_parts(words, entities, total))
    }
}
