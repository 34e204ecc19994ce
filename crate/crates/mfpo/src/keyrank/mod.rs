//! Keyword selection: multipartite word graph construction, weighted
//! PageRank, and top-k extraction over a sample's chosen response.

mod embed;
mod extract;
mod graph;
mod pagerank;

use std::collections::HashSet;

pub use embed::{cosine_similarity, FixedEmbedder, HashedNgramEmbedder, WordEmbedder};
pub use extract::{default_stoplist, extract_candidates, normalize_token, stem, Candidate, DEFAULT_STOPWORDS};
pub use graph::{build_graph, compose_edge, positional_affinity, EdgeWeight, GraphParams, WordGraph, WordNode};
pub use pagerank::{rank, RankParams, RankResult};

use crate::data::{Keyword, PreferenceSample};
use crate::error::Result;

/// End-to-end keyword selection parameters.
#[derive(Debug, Clone)]
pub struct KeyrankParams {
    pub graph: GraphParams,
    pub rank: RankParams,
    /// Rank over chosen response plus prompt instead of the chosen response
    /// alone.
    pub include_prompt: bool,
    pub stoplist: HashSet<String>,
}

impl Default for KeyrankParams {
    fn default() -> Self {
        Self {
            graph: GraphParams::default(),
            rank: RankParams::default(),
            include_prompt: false,
            stoplist: default_stoplist(),
        }
    }
}

/// Rank the words of a sample's chosen response and return the top-k
/// keywords with their scores.
pub fn select_keywords(
    sample: &PreferenceSample,
    params: &KeyrankParams,
    embedder: &dyn WordEmbedder,
) -> Result<Vec<Keyword>> {
    let mut text = Vec::new();
    if params.include_prompt {
        text.extend(sample.prompt.iter().cloned());
    }
    text.extend(sample.chosen.iter().cloned());

    let candidates = extract_candidates(&text, &params.stoplist)?;
    let graph = build_graph(&candidates, embedder, &params.graph)?;
    let result = rank(&graph, &params.rank)?;
    Ok(result
        .top_k
        .iter()
        .map(|word| Keyword {
            word: word.clone(),
            score: result.score_of(word).expect("top-k words are scored"),
        })
        .collect())
}

/// Annotate every sample in place with its selected keywords.
pub fn annotate_keywords(
    samples: &mut [PreferenceSample],
    params: &KeyrankParams,
    embedder: &dyn WordEmbedder,
) -> Result<()> {
    for sample in samples {
        sample.keywords = select_keywords(sample, params, embedder)?;
    }
    Ok(())
}
