//! Canonical text form shared by every tokenizer in the toolkit.
//!
//! Raw text is NFKC-normalized, every whitespace run collapses to a single
//! word marker (U+2581), and each punctuation codepoint is isolated into its
//! own word by inserting a boundary on both sides. The marker doubles as the
//! word boundary during pre-tokenization and maps back to a space on
//! detokenization.

use std::fmt;

use unicode_normalization::UnicodeNormalization;
use unicode_properties::{GeneralCategoryGroup, UnicodeGeneralCategory};

/// Word-boundary marker (U+2581, LOWER ONE EIGHTH BLOCK).
pub const MARKER: char = '\u{2581}';

/// Text in canonical form: NFKC, no raw whitespace, every word introduced by
/// a single [`MARKER`].
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct NormalizedText(String);

impl NormalizedText {
    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn into_string(self) -> String {
        self.0
    }

    /// True for text that carried no content at all (a lone marker).
    pub fn is_blank(&self) -> bool {
        self.0.chars().all(|c| c == MARKER)
    }
}

impl fmt::Display for NormalizedText {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl AsRef<str> for NormalizedText {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

fn is_punctuation(ch: char) -> bool {
    ch.general_category_group() == GeneralCategoryGroup::Punctuation
}

/// Bring raw text into canonical form.
///
/// Existing markers in the input count as whitespace, which makes the
/// function idempotent. Trailing whitespace produces no trailing marker;
/// empty or whitespace-only input normalizes to a lone marker.
pub fn normalize(raw: &str) -> NormalizedText {
    let mut out = String::with_capacity(raw.len() + MARKER.len_utf8());
    let mut boundary = true; // sentence start opens a word
    for ch in raw.nfkc() {
        if ch.is_whitespace() || ch == MARKER {
            boundary = true;
            continue;
        }
        let punct = is_punctuation(ch);
        if punct || boundary {
            out.push(MARKER);
        }
        out.push(ch);
        // punctuation is a word of its own, so it also closes one
        boundary = punct;
    }
    if out.is_empty() {
        out.push(MARKER);
    }
    NormalizedText(out)
}

/// Split canonical text into words, each retaining its leading marker.
///
/// A lone marker (blank input) yields no words.
pub fn pretokenize(text: &NormalizedText) -> Vec<String> {
    let s = text.as_str();
    if text.is_blank() {
        return Vec::new();
    }
    let mut starts: Vec<usize> = s
        .char_indices()
        .filter(|&(_, c)| c == MARKER)
        .map(|(i, _)| i)
        .collect();
    if starts.first() != Some(&0) {
        starts.insert(0, 0);
    }
    starts
        .iter()
        .zip(starts.iter().skip(1).chain(std::iter::once(&s.len())))
        .map(|(&a, &b)| s[a..b].to_string())
        .collect()
}

/// Map tokens back to plain text: concatenate, turn each marker into a
/// space, and drop the sentence-initial one.
pub fn detokenize<S: AsRef<str>>(tokens: &[S]) -> String {
    let mut out = String::new();
    for t in tokens {
        for ch in t.as_ref().chars() {
            out.push(if ch == MARKER { ' ' } else { ch });
        }
    }
    if let Some(rest) = out.strip_prefix(' ') {
        rest.to_string()
    } else {
        out
    }
}
