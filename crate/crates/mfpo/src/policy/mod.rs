//! Differentiable toy policy over a finite candidate-response set.
//!
//! The policy scores candidate responses with a bilinear form
//! `score(y | t, m) = u_y^T W psi(t, m) + b_y`, where `u_y` is a fixed
//! embedding of the response tokens, `psi` the joint text/image input
//! features, and `theta = (W, b)` the trainable parameters. Response
//! probabilities are the softmax over the candidate set, so log-probability
//! gradients are exact.

mod features;

pub use features::FeatureExtractor;

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{ImageTensor, TokenSeq};
use crate::error::{Error, Result};
use crate::rng;

/// Precomputed input features for one (prompt, image) conditioning.
#[derive(Debug, Clone, PartialEq)]
pub struct Features(pub Vec<f64>);

#[derive(Debug, Clone, PartialEq)]
pub struct ToyPolicy {
    extractor: FeatureExtractor,
    candidates: Vec<TokenSeq>,
    index: HashMap<TokenSeq, usize>,
    /// Fixed response embeddings u_y, resp_dim per candidate.
    embeddings: Vec<Vec<f64>>,
    /// Bilinear weights, resp_dim x input_dim row-major.
    w: Vec<f64>,
    /// Per-candidate bias.
    b: Vec<f64>,
}

impl ToyPolicy {
    /// Build a zero-initialized (uniform) policy over a candidate set. Every
    /// response later scored must be one of the candidates.
    pub fn new(extractor: FeatureExtractor, candidates: Vec<TokenSeq>) -> Result<Self> {
        extractor.validate()?;
        if candidates.is_empty() {
            return Err(Error::param("candidates", "empty candidate set"));
        }
        let mut index = HashMap::new();
        for (i, c) in candidates.iter().enumerate() {
            if index.insert(c.clone(), i).is_some() {
                return Err(Error::param(
                    "candidates",
                    format!("duplicate candidate \"{}\"", c.join(" ")),
                ));
            }
        }
        let embeddings: Vec<Vec<f64>> = candidates
            .iter()
            .map(|c| extractor.response_features(c))
            .collect();
        let w = vec![0.0; extractor.resp_dim * extractor.input_dim()];
        let b = vec![0.0; candidates.len()];
        Ok(Self {
            extractor,
            candidates,
            index,
            embeddings,
            w,
            b,
        })
    }

    /// Replace zero initialization with small seeded Gaussian parameters.
    pub fn with_random_init(mut self, seed: u64, scale: f64) -> Self {
        let key = rng::compose_key(rng::stream::PARAM_INIT, seed);
        for (i, w) in self.w.iter_mut().enumerate() {
            *w = scale * rng::normal(seed, key, i as u64);
        }
        let off = self.w.len() as u64;
        for (i, b) in self.b.iter_mut().enumerate() {
            *b = scale * rng::normal(seed, key, off + i as u64);
        }
        self
    }

    pub fn extractor(&self) -> &FeatureExtractor {
        &self.extractor
    }

    pub fn candidates(&self) -> &[TokenSeq] {
        &self.candidates
    }

    pub fn num_candidates(&self) -> usize {
        self.candidates.len()
    }

    pub fn candidate_index(&self, response: &TokenSeq) -> Result<usize> {
        self.index
            .get(response)
            .copied()
            .ok_or_else(|| Error::UnknownCandidate(response.join(" ")))
    }

    /// Total trainable parameter count (W then b, flat).
    pub fn param_count(&self) -> usize {
        self.w.len() + self.b.len()
    }

    pub fn params(&self) -> Vec<f64> {
        let mut p = self.w.clone();
        p.extend_from_slice(&self.b);
        p
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.param_count() {
            return Err(Error::param(
                "params",
                format!("expected {} values, got {}", self.param_count(), params.len()),
            ));
        }
        let (w, b) = params.split_at(self.w.len());
        self.w.copy_from_slice(w);
        self.b.copy_from_slice(b);
        Ok(())
    }

    /// In-place parameter update `theta += scale * delta`.
    pub fn apply_update(&mut self, delta: &[f64], scale: f64) {
        debug_assert_eq!(delta.len(), self.param_count());
        let nw = self.w.len();
        for (w, d) in self.w.iter_mut().zip(&delta[..nw]) {
            *w += scale * d;
        }
        for (b, d) in self.b.iter_mut().zip(&delta[nw..]) {
            *b += scale * d;
        }
    }

    /// Precompute conditioning features for a (prompt, image) pair.
    pub fn input_features(&self, prompt: &TokenSeq, image: &ImageTensor) -> Result<Features> {
        Ok(Features(self.extractor.input_features(prompt, image)?))
    }

    /// Raw candidate scores `u_y^T W psi + b_y`.
    pub fn scores(&self, features: &Features) -> Vec<f64> {
        let psi = &features.0;
        let input_dim = self.extractor.input_dim();
        debug_assert_eq!(psi.len(), input_dim);
        // y = W psi, one entry per embedding row.
        let mut wpsi = vec![0.0; self.extractor.resp_dim];
        for (r, out) in wpsi.iter_mut().enumerate() {
            let row = &self.w[r * input_dim..(r + 1) * input_dim];
            *out = row.iter().zip(psi).map(|(a, b)| a * b).sum();
        }
        self.embeddings
            .iter()
            .zip(&self.b)
            .map(|(u, &bias)| u.iter().zip(&wpsi).map(|(a, b)| a * b).sum::<f64>() + bias)
            .collect()
    }

    /// Log-softmax over the candidate set.
    pub fn log_probs(&self, features: &Features) -> Vec<f64> {
        let scores = self.scores(features);
        let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + scores.iter().map(|s| (s - max).exp()).sum::<f64>().ln();
        scores.into_iter().map(|s| s - lse).collect()
    }

    /// Log-probability of one candidate response given (prompt, image).
    pub fn log_prob(&self, prompt: &TokenSeq, image: &ImageTensor, response: &TokenSeq) -> Result<f64> {
        let idx = self.candidate_index(response)?;
        let feats = self.input_features(prompt, image)?;
        Ok(self.log_prob_feat(&feats, idx))
    }

    pub fn log_prob_feat(&self, features: &Features, idx: usize) -> f64 {
        self.log_probs(features)[idx]
    }

    /// Accumulate `scale * d log p(candidate idx | features) / d theta` into
    /// `grad` (flat W-then-b layout).
    pub fn accumulate_log_prob_grad(&self, features: &Features, idx: usize, scale: f64, grad: &mut [f64]) {
        debug_assert_eq!(grad.len(), self.param_count());
        let probs: Vec<f64> = self.log_probs(features).iter().map(|lp| lp.exp()).collect();
        let resp_dim = self.extractor.resp_dim;
        let input_dim = self.extractor.input_dim();

        // Probability-weighted mean embedding.
        let mut u_bar = vec![0.0; resp_dim];
        for (u, &p) in self.embeddings.iter().zip(&probs) {
            for (acc, &ui) in u_bar.iter_mut().zip(u) {
                *acc += p * ui;
            }
        }
        // dW = (u_idx - u_bar) outer psi
        let u = &self.embeddings[idx];
        for r in 0..resp_dim {
            let coeff = scale * (u[r] - u_bar[r]);
            if coeff == 0.0 {
                continue;
            }
            let row = &mut grad[r * input_dim..(r + 1) * input_dim];
            for (g, &x) in row.iter_mut().zip(&features.0) {
                *g += coeff * x;
            }
        }
        // db = e_idx - p
        let boff = self.w.len();
        for (k, &p) in probs.iter().enumerate() {
            grad[boff + k] += scale * (f64::from(k == idx) - p);
        }
    }

    /// Gradient of `log p(response | prompt, image)` with respect to theta.
    pub fn log_prob_grad(
        &self,
        prompt: &TokenSeq,
        image: &ImageTensor,
        response: &TokenSeq,
    ) -> Result<Vec<f64>> {
        let idx = self.candidate_index(response)?;
        let feats = self.input_features(prompt, image)?;
        let mut grad = vec![0.0; self.param_count()];
        self.accumulate_log_prob_grad(&feats, idx, 1.0, &mut grad);
        Ok(grad)
    }

    /// Frozen deep copy serving as the reference policy. Snapshots of
    /// snapshots are identical.
    pub fn snapshot_reference(&self) -> ToyPolicy {
        self.clone()
    }

    pub fn to_json(&self) -> Result<String> {
        let ckpt = PolicyCheckpoint {
            version: 1,
            dims: self.extractor.clone(),
            candidates: self.candidates.clone(),
            theta: self.params(),
        };
        Ok(serde_json::to_string(&ckpt)?)
    }

    pub fn from_json(json: &str) -> Result<Self> {
        let ckpt: PolicyCheckpoint =
            serde_json::from_str(json).map_err(|e| Error::Checkpoint(e.to_string()))?;
        if ckpt.version != 1 {
            return Err(Error::Checkpoint(format!(
                "unsupported version {}",
                ckpt.version
            )));
        }
        let mut policy = ToyPolicy::new(ckpt.dims, ckpt.candidates)?;
        policy
            .set_params(&ckpt.theta)
            .map_err(|e| Error::Checkpoint(e.to_string()))?;
        Ok(policy)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}

/// JSON checkpoint format: version, extractor dims, the candidate set, and
/// the flat parameter vector.
#[derive(Debug, Serialize, Deserialize)]
struct PolicyCheckpoint {
    version: u32,
    dims: FeatureExtractor,
    candidates: Vec<TokenSeq>,
    theta: Vec<f64>,
}
