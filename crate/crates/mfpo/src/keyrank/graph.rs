//! The multipartite word graph and its edge-weight algebra.
//!
//! Edge weights blend four factors for an ordered pair (i, j):
//!   theta  — positional affinity, sum over position pairs of 1/(1+|li-lj|^phi)
//!   sim    — cosine similarity of the word embeddings
//!   mu     — theta + gamma * sim
//!   tau    — mu * (1 + context boost from shared neighbor topics)
//!   kappa  — positional decay exp(-lambda * first position of the source i)
//!   omega  — max(0, tau * kappa), the weight ranking consumes
//!
//! kappa depends on the source word only, so omega is asymmetric and both
//! ordered directions of a pair are stored.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::keyrank::embed::{cosine_similarity, WordEmbedder};
use crate::keyrank::extract::Candidate;

/// Full factor decomposition of one directed edge weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeWeight {
    pub theta: f64,
    pub sim: f64,
    pub mu: f64,
    pub tau: f64,
    pub kappa: f64,
    pub omega: f64,
}

/// One graph node: a candidate word with positions and topic id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WordNode {
    pub word: String,
    pub positions: Vec<usize>,
    pub topic: usize,
}

impl WordNode {
    pub fn first_position(&self) -> usize {
        self.positions[0]
    }
}

/// Weighted multipartite graph over candidate words. Edges connect only
/// nodes in different topic groups; both directions of a pair are stored
/// because omega is direction-dependent.
#[derive(Debug, Clone, Default)]
pub struct WordGraph {
    pub nodes: Vec<WordNode>,
    pub topic_count: usize,
    edges: BTreeMap<(usize, usize), EdgeWeight>,
}

impl WordGraph {
    pub fn new(nodes: Vec<WordNode>) -> Self {
        let topic_count = nodes.iter().map(|n| n.topic + 1).max().unwrap_or(0);
        Self {
            nodes,
            topic_count,
            edges: BTreeMap::new(),
        }
    }

    /// Insert a directed edge, enforcing the multipartite and finiteness
    /// invariants.
    pub fn add_edge(&mut self, from: usize, to: usize, weight: EdgeWeight) -> Result<()> {
        if from == to || from >= self.nodes.len() || to >= self.nodes.len() {
            return Err(Error::param("edge", format!("bad node pair ({from}, {to})")));
        }
        if self.nodes[from].topic == self.nodes[to].topic {
            return Err(Error::param(
                "edge",
                format!(
                    "nodes `{}` and `{}` share topic {}",
                    self.nodes[from].word, self.nodes[to].word, self.nodes[from].topic
                ),
            ));
        }
        for (name, v) in [
            ("theta", weight.theta),
            ("sim", weight.sim),
            ("mu", weight.mu),
            ("tau", weight.tau),
            ("kappa", weight.kappa),
            ("omega", weight.omega),
        ] {
            if !v.is_finite() {
                return Err(Error::param("edge", format!("non-finite {name}: {v}")));
            }
        }
        if weight.theta < 0.0 || weight.kappa < 0.0 || weight.omega < 0.0 {
            return Err(Error::param("edge", "negative effective weight".to_string()));
        }
        self.edges.insert((from, to), weight);
        Ok(())
    }

    pub fn edge(&self, from: usize, to: usize) -> Option<&EdgeWeight> {
        self.edges.get(&(from, to))
    }

    pub fn edges(&self) -> impl Iterator<Item = (&(usize, usize), &EdgeWeight)> {
        self.edges.iter()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Neighbor lists in ascending node order, derived from stored edges.
    /// Adjacency is symmetric as a relation even though weights are not.
    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.nodes.len()];
        for &(from, to) in self.edges.keys() {
            adj[from].push(to);
        }
        for list in &mut adj {
            list.sort_unstable();
            list.dedup();
        }
        adj
    }
}

/// Positional affinity: sum over all position pairs of 1/(1+|li-lj|^phi).
/// Symmetric in its arguments.
pub fn positional_affinity(pos_i: &[usize], pos_j: &[usize], phi: f64) -> Result<f64> {
    if !phi.is_finite() || phi <= 0.0 {
        return Err(Error::param("phi", format!("{phi} must be > 0")));
    }
    if pos_i.is_empty() || pos_j.is_empty() {
        return Err(Error::param("positions", "empty position set"));
    }
    let mut theta = 0.0;
    for &li in pos_i {
        for &lj in pos_j {
            let d = li.abs_diff(lj) as f64;
            theta += 1.0 / (1.0 + d.powf(phi));
        }
    }
    Ok(theta)
}

/// Compose the full edge weight for an ordered pair whose source word first
/// occurs at `first_pos_i`.
pub fn compose_edge(
    theta: f64,
    sim: f64,
    gamma: f64,
    lambda: f64,
    first_pos_i: usize,
    context_boost: f64,
) -> Result<EdgeWeight> {
    if !gamma.is_finite() || gamma < 0.0 {
        return Err(Error::param("gamma", format!("{gamma} must be >= 0")));
    }
    if !lambda.is_finite() || lambda < 0.0 {
        return Err(Error::param("lambda", format!("{lambda} must be >= 0")));
    }
    if first_pos_i < 1 {
        return Err(Error::param("first_pos_i", "positions are 1-based"));
    }
    if !context_boost.is_finite() || context_boost < 0.0 {
        return Err(Error::param(
            "context_boost",
            format!("{context_boost} must be >= 0"),
        ));
    }
    let mu = theta + gamma * sim;
    let tau = mu * (1.0 + context_boost);
    let kappa = (-lambda * first_pos_i as f64).exp();
    let omega = (tau * kappa).max(0.0);
    Ok(EdgeWeight {
        theta,
        sim,
        mu,
        tau,
        kappa,
        omega,
    })
}

/// Parameters for graph construction.
#[derive(Debug, Clone)]
pub struct GraphParams {
    /// Positional decay-with-distance exponent in theta.
    pub phi: f64,
    /// Weight of the semantic term in mu.
    pub gamma: f64,
    /// Positional decay rate in kappa.
    pub lambda: f64,
    /// Strength of the contextual adjustment; 0 disables it.
    pub rho: f64,
}

impl Default for GraphParams {
    fn default() -> Self {
        Self {
            phi: 1.0,
            gamma: 0.5,
            lambda: 0.01,
            rho: 0.1,
        }
    }
}

/// Build the complete multipartite graph over the candidates: every ordered
/// cross-topic pair gets an edge. The contextual boost for a pair counts the
/// topics (other than the endpoints') that contain a common neighbor —
/// in the complete construction, every other topic.
pub fn build_graph(
    candidates: &[Candidate],
    embedder: &dyn WordEmbedder,
    params: &GraphParams,
) -> Result<WordGraph> {
    let nodes: Vec<WordNode> = candidates
        .iter()
        .map(|c| WordNode {
            word: c.word.clone(),
            positions: c.positions.clone(),
            topic: c.topic,
        })
        .collect();
    let mut graph = WordGraph::new(nodes);
    let n = graph.nodes.len();
    let topics = graph.topic_count;

    let embeddings: Vec<Vec<f64>> = graph
        .nodes
        .iter()
        .map(|node| embedder.embed(&node.word))
        .collect();

    for i in 0..n {
        for j in (i + 1)..n {
            if graph.nodes[i].topic == graph.nodes[j].topic {
                continue;
            }
            let theta =
                positional_affinity(&graph.nodes[i].positions, &graph.nodes[j].positions, params.phi)?;
            let sim = cosine_similarity(&embeddings[i], &embeddings[j])?;
            let shared_topics = topics.saturating_sub(2);
            let boost = if params.rho == 0.0 || topics < 2 {
                0.0
            } else {
                params.rho * shared_topics as f64 / (topics - 1) as f64
            };
            let fwd = compose_edge(
                theta,
                sim,
                params.gamma,
                params.lambda,
                graph.nodes[i].first_position(),
                boost,
            )?;
            let bwd = compose_edge(
                theta,
                sim,
                params.gamma,
                params.lambda,
                graph.nodes[j].first_position(),
                boost,
            )?;
            graph.add_edge(i, j, fwd)?;
            graph.add_edge(j, i, bwd)?;
        }
    }
    Ok(graph)
}
