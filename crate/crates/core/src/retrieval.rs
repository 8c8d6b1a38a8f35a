//! Keyword retrieval shared by the mock tools, the planners and the answer oracle.
//!
//! Text is case-folded, split on anything that is not alphanumeric, and filtered through
//! a fixed stopword list. A document matches a query when it covers at least
//! `match_threshold` of the query's distinct terms.

use std::collections::{BTreeSet, HashSet};
use std::sync::OnceLock;

use thiserror::Error;

const STOPWORDS_TXT: &str = include_str!("../assets/stopwords.txt");

pub const DEFAULT_MATCH_THRESHOLD: f64 = 0.5;

fn stopword_set() -> &'static HashSet<&'static str> {
    static SET: OnceLock<HashSet<&'static str>> = OnceLock::new();
    SET.get_or_init(|| STOPWORDS_TXT.lines().map(str::trim).filter(|l| !l.is_empty()).collect())
}

/// The bundled stopword list, in file order.
pub fn stopwords() -> Vec<&'static str> {
    STOPWORDS_TXT.lines().map(str::trim).filter(|l| !l.is_empty()).collect()
}

pub fn is_stopword(term: &str) -> bool {
    stopword_set().contains(term)
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("match threshold must lie in (0, 1], got {0}")]
pub struct ThresholdError(pub f64);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetrievalConfig {
    match_threshold: f64,
}

impl Default for RetrievalConfig {
    fn default() -> Self {
        Self { match_threshold: DEFAULT_MATCH_THRESHOLD }
    }
}

impl RetrievalConfig {
    pub fn new(match_threshold: f64) -> Result<Self, ThresholdError> {
        if !(match_threshold > 0.0 && match_threshold <= 1.0) {
            return Err(ThresholdError(match_threshold));
        }
        Ok(Self { match_threshold })
    }

    pub fn match_threshold(&self) -> f64 {
        self.match_threshold
    }

    /// Coverage of `query` by `doc`, or `None` when it falls below the threshold.
    pub fn match_score(&self, query: &Terms, doc: &Terms) -> Option<f64> {
        let s = query.coverage_by(doc);
        (s > 0.0 && s >= self.match_threshold).then_some(s)
    }

    pub fn matches(&self, query: &Terms, doc: &Terms) -> bool {
        self.match_score(query, doc).is_some()
    }

    pub fn matches_text(&self, query: &str, doc: &str) -> bool {
        self.matches(&Terms::new(query), &Terms::new(doc))
    }
}

/// Content terms of a text, in first-occurrence order, without duplicates.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Terms {
    ordered: Vec<String>,
    set: BTreeSet<String>,
}

impl Terms {
    pub fn new(text: &str) -> Self {
        let mut terms = Terms::default();
        terms.extend_text(text);
        terms
    }

    pub fn extend_text(&mut self, text: &str) {
        for raw in text.split(|c: char| !c.is_alphanumeric()) {
            if raw.is_empty() {
                continue;
            }
            let term = raw.to_lowercase();
            if is_stopword(&term) {
                continue;
            }
            if self.set.insert(term.clone()) {
                self.ordered.push(term);
            }
        }
    }

    pub fn is_empty(&self) -> bool {
        self.ordered.is_empty()
    }

    pub fn len(&self) -> usize {
        self.ordered.len()
    }

    pub fn contains(&self, term: &str) -> bool {
        self.set.contains(term)
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.ordered.iter().map(String::as_str)
    }

    /// Number of our terms also present in `other`.
    pub fn overlap(&self, other: &Terms) -> usize {
        self.ordered.iter().filter(|t| other.set.contains(*t)).count()
    }

    /// Fraction of our terms found in `doc`; zero for an empty term set.
    pub fn coverage_by(&self, doc: &Terms) -> f64 {
        if self.ordered.is_empty() {
            return 0.0;
        }
        self.overlap(doc) as f64 / self.ordered.len() as f64
    }

    pub fn joined(&self) -> String {
        self.ordered.join(" ")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stopword_file_has_fifty_entries() {
        let words = stopwords();
        assert_eq!(words.len(), 50);
        let unique: HashSet<_> = words.iter().collect();
        assert_eq!(unique.len(), 50);
        assert!(words.iter().all(|w| *w == w.to_lowercase()));
    }

    #[test]
    fn tokenizes_case_folded_and_filtered() {
        let t = Terms::new("What does the Signboard say? The signboard!");
        assert_eq!(t.iter().collect::<Vec<_>>(), vec!["signboard", "say"]);
    }

    #[test]
    fn partial_label_query_matches() {
        let cfg = RetrievalConfig::default();
        assert!(cfg.matches_text("meowing", "cat meowing"));
        assert!(cfg.matches_text("cat meowing", "cat meowing"));
        assert!(!cfg.matches_text("thunder", "cat meowing"));
        // exactly half the query terms
        assert!(cfg.matches_text("phone ringing", "church bell ringing"));
        assert!(!cfg.matches_text("red phone ringing", "church bell ringing"));
    }

    #[test]
    fn empty_query_never_matches() {
        let cfg = RetrievalConfig::default();
        assert!(!cfg.matches_text("the of a", "the of a"));
        assert!(!cfg.matches_text("", "anything"));
    }

    #[test]
    fn threshold_bounds() {
        assert!(RetrievalConfig::new(0.0).is_err());
        assert!(RetrievalConfig::new(1.5).is_err());
        assert!(RetrievalConfig::new(f64::NAN).is_err());
        assert!(RetrievalConfig::new(1.0).is_ok());
    }

    #[test]
    fn quotes_and_punctuation_split() {
        let t = Terms::new("the signboard reads 'Fu Lu'.");
        assert!(t.contains("fu") && t.contains("lu"));
    }
}
