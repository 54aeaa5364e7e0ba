//! Sentences annotated with possibly discontinuous, possibly overlapping
//! entity mentions.
//!
//! A [`Mention`] is an entity type plus a canonical list of token fragments.
//! Canonical means sorted, pairwise disjoint and never adjacent: adjacent
//! fragments are merged so that two mentions covering the same tokens always
//! compare equal. Strict-match evaluation relies on that equality.

mod inline;
mod standoff;
mod stats;
pub mod synth;
mod transform;

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use inline::{parse_inline, write_inline};
pub use standoff::{
    line_boundaries, parse_standoff, write_standoff, StandoffParse, StandoffWarning,
};
pub(crate) use stats::category_within;
pub use stats::{corpus_stats, overlap_category, OverlapCategory, StatsReport};
pub use transform::{flatten_for_flat_model, resample, split, ResampleMode};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CorpusError {
    #[error("line {line}: {msg}")]
    Malformed { line: usize, msg: String },
    #[error("fragment [{start},{end}) out of range for sentence of {len} tokens")]
    FragmentOutOfRange {
        start: usize,
        end: usize,
        len: usize,
    },
    #[error("fragments [{}, {}) and [{}, {}) overlap within one mention", .a.start, .a.end, .b.start, .b.end)]
    OverlappingFragments { a: Fragment, b: Fragment },
    #[error("mention has no fragments")]
    EmptyMention,
    #[error("duplicate mention {0}")]
    DuplicateMention(String),
    #[error("mention {0} is continuous")]
    ContinuousMention(String),
    #[error("corpus has no sentence with a discontinuous mention")]
    NoDiscontinuousSentences,
    #[error("need at least 3 documents to split, found {0}")]
    TooFewDocuments(usize),
    #[error("invalid split fractions train={train} dev={dev}")]
    BadFractions { train: f64, dev: f64 },
}

/// Half-open token range `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Fragment {
    pub start: usize,
    pub end: usize,
}

impl Fragment {
    pub fn new(start: usize, end: usize) -> Self {
        Fragment { start, end }
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }

    pub fn contains(&self, token: usize) -> bool {
        self.start <= token && token < self.end
    }

    pub fn intersects(&self, other: &Fragment) -> bool {
        self.start < other.end && other.start < self.end
    }
}

impl fmt::Display for Fragment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{}", self.start, self.end)
    }
}

/// Sorts fragments and merges adjacent ones. Fragments that share a token
/// are rejected.
pub fn canonicalize(fragments: &[Fragment]) -> Result<Vec<Fragment>, CorpusError> {
    let mut sorted = fragments.to_vec();
    sorted.sort();
    let mut out: Vec<Fragment> = Vec::with_capacity(sorted.len());
    for frag in sorted {
        if frag.is_empty() {
            return Err(CorpusError::EmptyMention);
        }
        match out.last_mut() {
            Some(prev) if frag.start < prev.end => {
                return Err(CorpusError::OverlappingFragments { a: *prev, b: frag });
            }
            Some(prev) if frag.start == prev.end => prev.end = frag.end,
            _ => out.push(frag),
        }
    }
    Ok(out)
}

/// Canonical fragments for an arbitrary set of token indices.
pub fn fragments_from_tokens<I: IntoIterator<Item = usize>>(tokens: I) -> Vec<Fragment> {
    let set: BTreeSet<usize> = tokens.into_iter().collect();
    let mut out: Vec<Fragment> = Vec::new();
    for t in set {
        match out.last_mut() {
            Some(prev) if prev.end == t => prev.end = t + 1,
            _ => out.push(Fragment::new(t, t + 1)),
        }
    }
    out
}

/// An entity mention. Field order gives the derived ordering: by fragments
/// first, then by type.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Mention {
    pub fragments: Vec<Fragment>,
    pub entity_type: String,
}

impl Mention {
    pub fn new(
        entity_type: impl Into<String>,
        fragments: &[Fragment],
    ) -> Result<Self, CorpusError> {
        let fragments = canonicalize(fragments)?;
        if fragments.is_empty() {
            return Err(CorpusError::EmptyMention);
        }
        Ok(Mention {
            fragments,
            entity_type: entity_type.into(),
        })
    }

    /// Builds a mention from `(start, end)` pairs.
    pub fn from_spans(
        entity_type: impl Into<String>,
        spans: &[(usize, usize)],
    ) -> Result<Self, CorpusError> {
        let frags: Vec<Fragment> = spans.iter().map(|&(s, e)| Fragment::new(s, e)).collect();
        Mention::new(entity_type, &frags)
    }

    pub fn from_tokens<I: IntoIterator<Item = usize>>(
        entity_type: impl Into<String>,
        tokens: I,
    ) -> Result<Self, CorpusError> {
        let fragments = fragments_from_tokens(tokens);
        if fragments.is_empty() {
            return Err(CorpusError::EmptyMention);
        }
        Ok(Mention {
            fragments,
            entity_type: entity_type.into(),
        })
    }

    pub fn is_discontinuous(&self) -> bool {
        self.fragments.len() > 1
    }

    pub fn start(&self) -> usize {
        self.fragments[0].start
    }

    pub fn end(&self) -> usize {
        self.fragments[self.fragments.len() - 1].end
    }

    /// Number of tokens inside fragments. Interval tokens are not counted.
    pub fn token_len(&self) -> usize {
        self.fragments.iter().map(Fragment::len).sum()
    }

    /// Total number of uncovered tokens between the first and the last fragment.
    pub fn interval_len(&self) -> usize {
        self.end() - self.start() - self.token_len()
    }

    pub fn tokens(&self) -> impl Iterator<Item = usize> + '_ {
        self.fragments.iter().flat_map(|f| f.start..f.end)
    }

    pub fn token_set(&self) -> BTreeSet<usize> {
        self.tokens().collect()
    }

    pub fn contains_token(&self, token: usize) -> bool {
        self.fragments.iter().any(|f| f.contains(token))
    }

    pub fn intersects(&self, other: &Mention) -> bool {
        self.fragments
            .iter()
            .any(|a| other.fragments.iter().any(|b| a.intersects(b)))
    }

    /// True when every token of `other` is also a token of `self`.
    pub fn covers(&self, other: &Mention) -> bool {
        other.tokens().all(|t| self.contains_token(t))
    }

    /// Same token set, ignoring the entity type.
    pub fn same_span(&self, other: &Mention) -> bool {
        self.fragments == other.fragments
    }

    /// Space-joined surface form, with `...` marking intervals.
    pub fn surface(&self, tokens: &[String]) -> String {
        let parts: Vec<String> = self
            .fragments
            .iter()
            .map(|f| tokens[f.start..f.end.min(tokens.len())].join(" "))
            .collect();
        parts.join(" ... ")
    }

    /// Inline-format rendering, e.g. `0,1;3,4 ADR`.
    pub fn to_inline(&self) -> String {
        let frags: Vec<String> = self.fragments.iter().map(ToString::to_string).collect();
        format!("{} {}", frags.join(";"), self.entity_type)
    }
}

impl fmt::Display for Mention {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_inline())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    pub tokens: Vec<String>,
    /// Sorted, duplicate free.
    pub mentions: Vec<Mention>,
    pub doc_id: String,
    pub sent_index: usize,
}

impl Sentence {
    pub fn new(
        tokens: Vec<String>,
        mut mentions: Vec<Mention>,
        doc_id: impl Into<String>,
        sent_index: usize,
    ) -> Result<Self, CorpusError> {
        let len = tokens.len();
        for m in &mentions {
            if let Some(f) = m.fragments.iter().find(|f| f.end > len) {
                return Err(CorpusError::FragmentOutOfRange {
                    start: f.start,
                    end: f.end,
                    len,
                });
            }
        }
        mentions.sort();
        if let Some(w) = mentions.windows(2).find(|w| w[0] == w[1]) {
            return Err(CorpusError::DuplicateMention(w[0].to_inline()));
        }
        Ok(Sentence {
            tokens,
            mentions,
            doc_id: doc_id.into(),
            sent_index,
        })
    }

    /// Convenience constructor from a space-separated string.
    pub fn from_text(text: &str, mentions: Vec<Mention>) -> Result<Self, CorpusError> {
        let tokens = text.split_whitespace().map(str::to_string).collect();
        Sentence::new(tokens, mentions, "", 0)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn has_discontinuous(&self) -> bool {
        self.mentions.iter().any(Mention::is_discontinuous)
    }

    /// Same sentence with a different mention set.
    pub fn with_mentions(&self, mentions: Vec<Mention>) -> Result<Self, CorpusError> {
        Sentence::new(
            self.tokens.clone(),
            mentions,
            self.doc_id.clone(),
            self.sent_index,
        )
    }

    /// Key used to group sentences into documents. Sentences without a
    /// document id form singleton documents keyed by their position.
    pub(crate) fn doc_key(&self, position: usize) -> String {
        if self.doc_id.is_empty() {
            format!("#{position}")
        } else {
            self.doc_id.clone()
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Corpus {
    pub sentences: Vec<Sentence>,
    pub split_name: String,
}

impl Corpus {
    pub fn new(sentences: Vec<Sentence>) -> Self {
        Corpus {
            sentences,
            split_name: String::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    pub fn mention_count(&self) -> usize {
        self.sentences.iter().map(|s| s.mentions.len()).sum()
    }

    /// Sorted set of entity types appearing in the corpus.
    pub fn entity_types(&self) -> Vec<String> {
        let set: BTreeSet<&str> = self
            .sentences
            .iter()
            .flat_map(|s| s.mentions.iter().map(|m| m.entity_type.as_str()))
            .collect();
        set.into_iter().map(str::to_string).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f(s: usize, e: usize) -> Fragment {
        Fragment::new(s, e)
    }

    #[test]
    fn canonicalize_sorts() {
        assert_eq!(
            canonicalize(&[f(3, 5), f(0, 2)]).unwrap(),
            vec![f(0, 2), f(3, 5)]
        );
    }

    #[test]
    fn canonicalize_merges_adjacent() {
        assert_eq!(canonicalize(&[f(0, 2), f(2, 4)]).unwrap(), vec![f(0, 4)]);
        assert_eq!(
            canonicalize(&[f(2, 3), f(0, 1), f(1, 2)]).unwrap(),
            vec![f(0, 3)]
        );
    }

    #[test]
    fn canonicalize_rejects_proper_overlap() {
        assert!(matches!(
            canonicalize(&[f(0, 3), f(2, 5)]),
            Err(CorpusError::OverlappingFragments { .. })
        ));
    }

    #[test]
    fn mention_lengths() {
        let m = Mention::from_spans("ADR", &[(0, 1), (3, 4)]).unwrap();
        assert_eq!(m.token_len(), 2);
        assert_eq!(m.interval_len(), 2);
        assert!(m.is_discontinuous());
        let c = Mention::from_spans("ADR", &[(0, 3)]).unwrap();
        assert_eq!((c.token_len(), c.interval_len()), (3, 0));
    }

    #[test]
    fn sentence_rejects_duplicates_and_out_of_range() {
        let m = Mention::from_spans("ADR", &[(0, 2)]).unwrap();
        let toks: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
        assert!(matches!(
            Sentence::new(toks.clone(), vec![m.clone(), m.clone()], "", 0),
            Err(CorpusError::DuplicateMention(_))
        ));
        let far = Mention::from_spans("ADR", &[(2, 4)]).unwrap();
        assert!(matches!(
            Sentence::new(toks, vec![far], "", 0),
            Err(CorpusError::FragmentOutOfRange { .. })
        ));
    }

    #[test]
    fn fragments_from_token_set() {
        assert_eq!(fragments_from_tokens([4, 0, 1, 3]), vec![f(0, 2), f(3, 5)]);
        assert!(fragments_from_tokens(std::iter::empty()).is_empty());
    }
}
