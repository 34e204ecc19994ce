//! Candidate word extraction and topic grouping.
//!
//! Every non-stoplist alphabetic token is a candidate; candidates sharing a
//! normalized (case-folded, suffix-stripped) form belong to one topic group.

use std::collections::HashMap;
use std::collections::HashSet;

use crate::data::TokenSeq;
use crate::error::{Error, Result};

/// Small built-in English stopword list. Deliberately short: the target
/// texts are captions and short answers.
pub const DEFAULT_STOPWORDS: &[&str] = &[
    "a", "an", "the", "and", "or", "but", "if", "then", "else", "of", "in", "on", "at", "by",
    "for", "with", "to", "from", "as", "is", "are", "was", "were", "be", "been", "being", "am",
    "it", "its", "this", "that", "these", "those", "there", "here", "he", "she", "they", "them",
    "his", "her", "their", "we", "you", "i", "me", "my", "our", "us", "not", "no", "nor", "do",
    "does", "did", "done", "can", "could", "will", "would", "shall", "should", "may", "might",
    "must", "have", "has", "had", "having", "about", "into", "over", "under", "very", "so",
    "than", "too", "also", "just", "only", "own", "same", "such", "both", "each", "more", "most",
    "some", "any", "all", "what", "which", "who", "whom", "when", "where", "why", "how",
];

/// Build the default stoplist as an owned set.
pub fn default_stoplist() -> HashSet<String> {
    DEFAULT_STOPWORDS.iter().map(|w| w.to_string()).collect()
}

/// A candidate word with its 1-based occurrence positions and topic group.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Candidate {
    /// Case-folded surface form.
    pub word: String,
    /// Sorted, 1-based token indices into the original sequence.
    pub positions: Vec<usize>,
    /// Topic group index (words sharing a stem).
    pub topic: usize,
}

impl Candidate {
    pub fn first_position(&self) -> usize {
        self.positions[0]
    }
}

/// Case-fold a raw token and trim non-alphanumeric edges; `None` when the
/// result is empty or contains non-alphabetic characters.
pub fn normalize_token(token: &str) -> Option<String> {
    let trimmed = token.trim_matches(|c: char| !c.is_alphanumeric());
    if trimmed.is_empty() || !trimmed.chars().all(|c| c.is_alphabetic()) {
        return None;
    }
    Some(trimmed.to_lowercase())
}

/// Tiny suffix stripper grouping singular/plural and -ing/-ed variants.
/// A normalization heuristic, not a linguistic lemmatizer.
pub fn stem(word: &str) -> String {
    let n = word.chars().count();
    if n > 4 {
        if let Some(base) = word.strip_suffix("ies") {
            return format!("{base}y");
        }
        if let Some(base) = word.strip_suffix("ing") {
            return base.to_string();
        }
    }
    if n > 3 {
        if let Some(base) = word.strip_suffix("ed") {
            return base.to_string();
        }
        if let Some(base) = word.strip_suffix("es") {
            return base.to_string();
        }
    }
    if n > 2 && !word.ends_with("ss") {
        if let Some(base) = word.strip_suffix('s') {
            return base.to_string();
        }
    }
    word.to_string()
}

/// Extract candidates from a token sequence. Positions are 1-based indices
/// into the original sequence (stopwords still occupy positions). Node and
/// topic order follow first occurrence, which makes downstream ranking
/// deterministic.
pub fn extract_candidates(tokens: &TokenSeq, stoplist: &HashSet<String>) -> Result<Vec<Candidate>> {
    if tokens.is_empty() {
        return Err(Error::param("tokens", "empty token sequence"));
    }
    let mut candidates: Vec<Candidate> = Vec::new();
    let mut by_word: HashMap<String, usize> = HashMap::new();
    let mut topic_ids: HashMap<String, usize> = HashMap::new();

    for (idx, raw) in tokens.iter().enumerate() {
        let Some(word) = normalize_token(raw) else {
            continue;
        };
        if stoplist.contains(&word) {
            continue;
        }
        let position = idx + 1;
        if let Some(&ci) = by_word.get(&word) {
            candidates[ci].positions.push(position);
            continue;
        }
        let stem_form = stem(&word);
        let next_topic = topic_ids.len();
        let topic = *topic_ids.entry(stem_form).or_insert(next_topic);
        by_word.insert(word.clone(), candidates.len());
        candidates.push(Candidate {
            word,
            positions: vec![position],
            topic,
        });
    }

    if candidates.is_empty() {
        return Err(Error::NoCandidates);
    }
    Ok(candidates)
}
