//! Weighted PageRank over the word graph.
//!
//! Scores start at `1 - damping` and are updated with
//! `r(i) = (1 - damping) + damping * sum_{j in N(i)} omega(i,j) * r(j) / sum_{m in N(j)} omega(j,m)`
//! until the max coordinate change drops below `tol`. Isolated nodes keep the
//! initial score exactly.

use crate::error::{Error, Result};
use crate::keyrank::graph::WordGraph;

#[derive(Debug, Clone)]
pub struct RankParams {
    /// Damping factor in (0, 1).
    pub damping: f64,
    /// Convergence threshold on the max score change.
    pub tol: f64,
    /// Iteration cap; exhausting it returns `converged = false`.
    pub max_iter: usize,
    /// Number of keywords to keep.
    pub k: usize,
}

impl Default for RankParams {
    fn default() -> Self {
        Self {
            damping: 0.85,
            tol: 1e-8,
            max_iter: 200,
            k: 3,
        }
    }
}

impl RankParams {
    pub fn validate(&self) -> Result<()> {
        if !self.damping.is_finite() || self.damping <= 0.0 || self.damping >= 1.0 {
            return Err(Error::param("damping", format!("{} not in (0, 1)", self.damping)));
        }
        if !self.tol.is_finite() || self.tol <= 0.0 {
            return Err(Error::param("tol", format!("{} must be > 0", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(Error::param("max_iter", "must be at least 1"));
        }
        Ok(())
    }
}

/// Ranking output: per-word scores in node order plus the selected top-k.
#[derive(Debug, Clone, PartialEq)]
pub struct RankResult {
    /// `(word, score)` in node order.
    pub scores: Vec<(String, f64)>,
    pub iterations: usize,
    pub converged: bool,
    /// Top-k words by score, ties broken by earliest first occurrence, then
    /// lexicographically.
    pub top_k: Vec<String>,
}

impl RankResult {
    pub fn score_of(&self, word: &str) -> Option<f64> {
        self.scores
            .iter()
            .find(|(w, _)| w == word)
            .map(|&(_, s)| s)
    }
}

/// Run the fixed-point iteration. Scores from the last sweep are returned
/// even when the iteration cap is exhausted; the caller decides what a
/// non-converged result is worth.
pub fn rank(graph: &WordGraph, params: &RankParams) -> Result<RankResult> {
    params.validate()?;
    let n = graph.node_count();
    if n == 0 {
        return Err(Error::param("graph", "empty graph"));
    }

    let adjacency = graph.adjacency();
    let base = 1.0 - params.damping;

    // Out-weight mass per node; a zero sum means the node gives nothing away.
    let out_sum: Vec<f64> = (0..n)
        .map(|j| {
            adjacency[j]
                .iter()
                .map(|&m| graph.edge(j, m).map_or(0.0, |e| e.omega))
                .sum()
        })
        .collect();

    let mut scores = vec![base; n];
    let mut next = vec![0.0; n];
    let mut iterations = 0;
    let mut converged = false;

    while iterations < params.max_iter {
        iterations += 1;
        for i in 0..n {
            let mut acc = 0.0;
            for &j in &adjacency[i] {
                if out_sum[j] > 0.0 {
                    let omega = graph.edge(i, j).map_or(0.0, |e| e.omega);
                    acc += omega * scores[j] / out_sum[j];
                }
            }
            next[i] = base + params.damping * acc;
            if !next[i].is_finite() || next[i] < 0.0 {
                return Err(Error::param(
                    "rank",
                    format!("score for `{}` left its valid range: {}", graph.nodes[i].word, next[i]),
                ));
            }
        }
        let delta = scores
            .iter()
            .zip(&next)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        std::mem::swap(&mut scores, &mut next);
        if delta < params.tol {
            converged = true;
            break;
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        scores[b]
            .partial_cmp(&scores[a])
            .expect("scores are finite")
            .then_with(|| graph.nodes[a].first_position().cmp(&graph.nodes[b].first_position()))
            .then_with(|| graph.nodes[a].word.cmp(&graph.nodes[b].word))
    });
    let top_k: Vec<String> = order
        .iter()
        .take(params.k.min(n))
        .map(|&i| graph.nodes[i].word.clone())
        .collect();

    Ok(RankResult {
        scores: graph
            .nodes
            .iter()
            .zip(&scores)
            .map(|(node, &s)| (node.word.clone(), s))
            .collect(),
        iterations,
        converged,
        top_k,
    })
}
