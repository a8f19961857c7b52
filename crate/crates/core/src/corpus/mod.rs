//! Corpus ingestion: pages, vocabulary, link graph, and anchor statistics.
//!
//! The corpus file format is UTF-8 JSON lines, one page per line:
//!
//! ```json
//! {"id": "Entity_Id", "text": "raw text with [[Target|surface]] anchors", "redirect": "Optional_Target"}
//! ```
//!
//! Redirect pages feed the mention dictionary and nothing else. All
//! structures built here are immutable after construction and safe to share
//! across threads.

mod graph;
mod occurrences;
mod stats;
mod tokenize;
mod vocab;

pub use graph::LinkGraph;
pub use occurrences::{extract_anchor_occurrences, AnchorOccurrence};
pub use stats::AnchorStatistics;
pub use tokenize::{fold_surface, fold_title, parse_annotated_text, tokenize, Anchor};
pub use vocab::{SymbolId, SymbolKind, Vocabulary};

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};

/// Maximum redirect-chain length followed before a target is treated as
/// unresolvable.
const MAX_REDIRECT_HOPS: usize = 16;

/// One corpus page: either an article describing an entity or a redirect.
#[derive(Debug, Clone)]
pub struct Page {
    /// Entity id of the page subject. Never empty.
    pub id: String,
    /// Token sequence of the page text, anchors inlined.
    pub tokens: Vec<String>,
    /// Anchors in order of appearance; spans never overlap.
    pub anchors: Vec<Anchor>,
    /// Redirect target, if this page is a redirect.
    pub redirect: Option<String>,
}

impl Page {
    pub fn is_article(&self) -> bool {
        self.redirect.is_none()
    }
}

#[derive(Deserialize)]
struct RawPage {
    id: String,
    #[serde(default)]
    text: String,
    #[serde(default)]
    redirect: Option<String>,
}

/// A parsed corpus plus its fully resolved redirect map.
#[derive(Debug, Clone)]
pub struct Corpus {
    pub pages: Vec<Page>,
    /// Redirect page id -> final non-redirect target (None for cycles and
    /// over-long chains).
    resolved: HashMap<String, Option<String>>,
}

impl Corpus {
    /// Reads a JSON-lines corpus.
    pub fn from_reader<R: Read>(reader: R) -> Result<Self> {
        let mut pages = Vec::new();
        for (idx, line) in BufReader::new(reader).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let raw: RawPage = serde_json::from_str(&line)
                .map_err(|e| Error::line(idx + 1, format!("invalid page record: {e}")))?;
            if raw.id.is_empty() {
                return Err(Error::line(idx + 1, "page id must be non-empty"));
            }
            if raw.id.contains(['\t', '\n']) {
                return Err(Error::line(idx + 1, "page id may not contain tab or newline"));
            }
            let (tokens, anchors) = if raw.redirect.is_some() {
                (Vec::new(), Vec::new())
            } else {
                parse_annotated_text(&raw.text)
            };
            pages.push(Page {
                id: raw.id,
                tokens,
                anchors,
                redirect: raw.redirect,
            });
        }
        Self::from_pages(pages)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_reader(std::fs::File::open(path)?)
    }

    /// Builds a corpus from already-constructed pages, validating ids and
    /// resolving redirect chains.
    pub fn from_pages(pages: Vec<Page>) -> Result<Self> {
        let mut seen = HashMap::new();
        for (idx, page) in pages.iter().enumerate() {
            if page.id.is_empty() {
                return Err(Error::data(format!("page {idx} has an empty id")));
            }
            if let Some(prev) = seen.insert(page.id.clone(), idx) {
                return Err(Error::data(format!(
                    "duplicate page id '{}' (pages {prev} and {idx})",
                    page.id
                )));
            }
        }

        let raw_redirects: HashMap<&str, &str> = pages
            .iter()
            .filter_map(|p| p.redirect.as_deref().map(|t| (p.id.as_str(), t)))
            .collect();
        let mut resolved = HashMap::new();
        for &source in raw_redirects.keys() {
            let mut current = source;
            let mut target = None;
            for _ in 0..MAX_REDIRECT_HOPS {
                match raw_redirects.get(current) {
                    Some(&next) if next == source => break, // cycle back to start
                    Some(&next) => current = next,
                    None => {
                        target = Some(current.to_string());
                        break;
                    }
                }
            }
            resolved.insert(source.to_string(), target);
        }

        Ok(Corpus { pages, resolved })
    }

    /// Resolves an anchor target through redirect chains. Returns `None`
    /// for cyclic or over-long chains; targets without a redirect page
    /// resolve to themselves.
    pub fn resolve_target<'a>(&'a self, target: &'a str) -> Option<&'a str> {
        match self.resolved.get(target) {
            Some(Some(t)) => Some(t.as_str()),
            Some(None) => None,
            None => Some(target),
        }
    }

    /// Article pages in corpus order.
    pub fn articles(&self) -> impl Iterator<Item = &Page> {
        self.pages.iter().filter(|p| p.is_article())
    }

    /// Redirect pages as (source id, fully resolved target) pairs, skipping
    /// unresolvable chains.
    pub fn redirects(&self) -> impl Iterator<Item = (&str, &str)> {
        self.pages.iter().filter_map(|p| {
            p.redirect.as_ref()?;
            Some((p.id.as_str(), self.resolve_target(&p.id)?))
        })
    }
}
