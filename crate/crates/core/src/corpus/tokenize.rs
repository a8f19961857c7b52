//! Tokenization and the inline `[[Target|surface]]` anchor syntax.

use std::ops::Range;

/// An in-page link to another entity, covering a (possibly empty) token span.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Anchor {
    /// Raw target entity id as written, before redirect resolution.
    pub target: String,
    /// Token span of the anchor surface within the page token sequence.
    pub span: Range<usize>,
    /// Raw surface text as written.
    pub surface: String,
}

impl Anchor {
    /// Position index of the anchor, i.e. the first token of its span.
    pub fn position(&self) -> usize {
        self.span.start
    }
}

/// Splits raw text into lowercased tokens.
///
/// Tokens are whitespace-separated chunks with surrounding non-alphanumeric
/// characters stripped; interior punctuation (hyphens, apostrophes, periods)
/// is preserved. Chunks that strip down to nothing are dropped, so the
/// result never contains empty tokens.
pub fn tokenize(raw: &str) -> Vec<String> {
    raw.split_whitespace()
        .filter_map(normalize_token)
        .collect()
}

fn normalize_token(chunk: &str) -> Option<String> {
    let trimmed = chunk.trim_matches(|c: char| !c.is_alphanumeric());
    if trimmed.is_empty() {
        None
    } else {
        Some(trimmed.to_lowercase())
    }
}

/// Case-folds an anchor surface or mention surface for dictionary keys:
/// lowercased, with whitespace runs collapsed to single spaces.
pub fn fold_surface(surface: &str) -> String {
    surface
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
}

/// Derives the matchable title of an entity id: underscores become spaces,
/// then the result is case-folded like a surface.
pub fn fold_title(entity_id: &str) -> String {
    fold_surface(&entity_id.replace('_', " "))
}

/// Tokenizes text containing inline `[[Target|surface]]` / `[[Target]]`
/// anchors, recording the anchor spans.
///
/// This is a best-effort importer: no nesting, no templates. An unclosed
/// `[[` is kept as literal text; an anchor with an empty target contributes
/// its surface as plain text.
pub fn parse_annotated_text(raw: &str) -> (Vec<String>, Vec<Anchor>) {
    let mut tokens = Vec::new();
    let mut anchors = Vec::new();
    let mut rest = raw;

    while let Some(open) = rest.find("[[") {
        tokens.extend(tokenize(&rest[..open]));
        let after_open = &rest[open + 2..];
        let Some(close) = after_open.find("]]") else {
            // Unclosed anchor: treat the remainder literally.
            tokens.extend(tokenize(&rest[open..]));
            return (tokens, anchors);
        };
        let inner = &after_open[..close];
        rest = &after_open[close + 2..];

        let (target, surface) = match inner.find('|') {
            Some(pipe) => (&inner[..pipe], &inner[pipe + 1..]),
            None => (inner, inner),
        };
        let target = target.trim();
        let start = tokens.len();
        tokens.extend(tokenize(surface));
        if target.is_empty() {
            continue;
        }
        anchors.push(Anchor {
            target: target.to_string(),
            span: start..tokens.len(),
            surface: surface.trim().to_string(),
        });
    }
    tokens.extend(tokenize(rest));
    (tokens, anchors)
}
