//! Word embeddings for semantic similarity.
//!
//! The default provider builds deterministic hashed character-n-gram vectors
//! so the pipeline runs with no external model; tests can inject hand-crafted
//! vectors through the trait.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::rng;

pub trait WordEmbedder {
    fn dim(&self) -> usize;
    fn embed(&self, word: &str) -> Vec<f64>;
}

/// Deterministic character-n-gram embedding: each boundary-padded bigram and
/// trigram of the word contributes a seeded Gaussian vector. Words sharing
/// n-grams get correlated vectors.
#[derive(Debug, Clone)]
pub struct HashedNgramEmbedder {
    dim: usize,
}

impl HashedNgramEmbedder {
    pub fn new(dim: usize) -> Self {
        Self { dim }
    }
}

impl Default for HashedNgramEmbedder {
    fn default() -> Self {
        Self::new(64)
    }
}

impl WordEmbedder for HashedNgramEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, word: &str) -> Vec<f64> {
        let padded: Vec<char> = std::iter::once('#')
            .chain(word.chars())
            .chain(std::iter::once('#'))
            .collect();
        let mut v = vec![0.0; self.dim];
        for n in [2usize, 3] {
            if padded.len() < n {
                continue;
            }
            for gram in padded.windows(n) {
                let key = rng::stable_hash(&gram.iter().collect::<String>());
                for (i, slot) in v.iter_mut().enumerate() {
                    *slot += rng::normal(key, rng::stream::WORD_EMBEDDING, i as u64);
                }
            }
        }
        v
    }
}

/// Table-backed embedder for tests.
#[derive(Debug, Clone, Default)]
pub struct FixedEmbedder {
    dim: usize,
    table: HashMap<String, Vec<f64>>,
}

impl FixedEmbedder {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            table: HashMap::new(),
        }
    }

    pub fn insert(&mut self, word: impl Into<String>, vector: Vec<f64>) {
        assert_eq!(vector.len(), self.dim);
        self.table.insert(word.into(), vector);
    }
}

impl WordEmbedder for FixedEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, word: &str) -> Vec<f64> {
        self.table
            .get(word)
            .cloned()
            .unwrap_or_else(|| vec![0.0; self.dim])
    }
}

/// Cosine similarity of two nonzero vectors of equal dimension, clamped to
/// [-1, 1] against floating-point drift.
pub fn cosine_similarity(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len().to_string(),
            actual: b.len().to_string(),
        });
    }
    let mut dot = 0.0;
    let mut na = 0.0;
    let mut nb = 0.0;
    for (x, y) in a.iter().zip(b) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return Err(Error::param("vector", "cosine of a zero vector is undefined"));
    }
    Ok((dot / (na.sqrt() * nb.sqrt())).clamp(-1.0, 1.0))
}
