//! Deterministic feature extraction standing in for the encoders of a real
//! multimodal model.
//!
//! Text features are a fixed random projection of the bag of tokens: each
//! word contributes a Gaussian vector seeded by its stable hash, and the
//! contributions are averaged. Image features are per-channel mean-pooled
//! patch intensities over a PxP grid. Both maps are pure functions of their
//! input, bit for bit.

use serde::{Deserialize, Serialize};

use crate::data::{ImageTensor, TokenSeq};
use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureExtractor {
    /// Dimension of the text (and response) projection.
    pub text_dim: usize,
    /// Dimension of candidate-response embeddings.
    pub resp_dim: usize,
    /// Patch grid side length P; image features have P*P*channels entries.
    pub patch_grid: usize,
    /// Expected image channel count.
    pub channels: usize,
}

impl Default for FeatureExtractor {
    fn default() -> Self {
        Self {
            text_dim: 24,
            resp_dim: 16,
            patch_grid: 4,
            channels: 3,
        }
    }
}

impl FeatureExtractor {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("text_dim", self.text_dim),
            ("resp_dim", self.resp_dim),
            ("patch_grid", self.patch_grid),
        ] {
            if v == 0 {
                return Err(Error::param("extractor", format!("{name} must be positive")));
            }
        }
        if self.channels != 1 && self.channels != 3 {
            return Err(Error::param("extractor", "channels must be 1 or 3"));
        }
        Ok(())
    }

    pub fn image_dim(&self) -> usize {
        self.patch_grid * self.patch_grid * self.channels
    }

    /// Dimension of the joint `[text; image]` input feature vector.
    pub fn input_dim(&self) -> usize {
        self.text_dim + self.image_dim()
    }

    fn bag_projection(&self, tokens: &TokenSeq, stream: u64, dim: usize) -> Vec<f64> {
        let mut v = vec![0.0; dim];
        for word in tokens {
            let key = rng::compose_key(stream, rng::stable_hash(word));
            for (i, slot) in v.iter_mut().enumerate() {
                *slot += rng::normal(0, key, i as u64);
            }
        }
        if !tokens.is_empty() {
            let inv = 1.0 / tokens.len() as f64;
            for slot in &mut v {
                *slot *= inv;
            }
        }
        v
    }

    /// Text-side features of a prompt.
    pub fn text_features(&self, tokens: &TokenSeq) -> Vec<f64> {
        self.bag_projection(tokens, rng::stream::TEXT_FEATURES, self.text_dim)
    }

    /// Candidate-response embedding (a different projection stream, so
    /// response identity is not confounded with prompt content).
    pub fn response_features(&self, tokens: &TokenSeq) -> Vec<f64> {
        self.bag_projection(tokens, rng::stream::RESPONSE_FEATURES, self.resp_dim)
    }

    /// Per-channel mean intensity over a PxP patch grid. Patch (r, c) covers
    /// rows [r*H/P, (r+1)*H/P) and the analogous columns; empty patches
    /// (image smaller than the grid) contribute zero.
    pub fn image_features(&self, image: &ImageTensor) -> Result<Vec<f64>> {
        if image.channels() != self.channels {
            return Err(Error::DimensionMismatch {
                expected: format!("{} channels", self.channels),
                actual: format!("{} channels", image.channels()),
            });
        }
        let p = self.patch_grid;
        let (h, w, c) = image.dims();
        let mut feats = vec![0.0; p * p * c];
        for pr in 0..p {
            let y0 = pr * h / p;
            let y1 = (pr + 1) * h / p;
            for pc in 0..p {
                let x0 = pc * w / p;
                let x1 = (pc + 1) * w / p;
                let count = (y1 - y0) * (x1 - x0);
                if count == 0 {
                    continue;
                }
                for ch in 0..c {
                    let mut sum = 0.0;
                    for y in y0..y1 {
                        for x in x0..x1 {
                            sum += image.get(y, x, ch);
                        }
                    }
                    feats[(pr * p + pc) * c + ch] = sum / count as f64;
                }
            }
        }
        Ok(feats)
    }

    /// Joint `[text; image]` feature vector conditioning the policy.
    pub fn input_features(&self, prompt: &TokenSeq, image: &ImageTensor) -> Result<Vec<f64>> {
        let mut v = self.text_features(prompt);
        v.extend(self.image_features(image)?);
        Ok(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(words: &[&str]) -> TokenSeq {
        words.iter().map(|w| w.to_string()).collect()
    }

    #[test]
    fn features_are_bit_deterministic() {
        let fx = FeatureExtractor::default();
        let t = toks(&["red", "car"]);
        let a = fx.text_features(&t);
        let b = fx.text_features(&t);
        assert_eq!(a, b);
        let img = ImageTensor::filled(8, 8, 3, 0.3).unwrap();
        assert_eq!(fx.image_features(&img).unwrap(), fx.image_features(&img).unwrap());
    }

    #[test]
    fn dimensions_are_as_declared() {
        let fx = FeatureExtractor::default();
        assert_eq!(fx.text_features(&toks(&["a"])).len(), 24);
        assert_eq!(fx.response_features(&toks(&["a"])).len(), 16);
        let img = ImageTensor::filled(8, 8, 3, 0.3).unwrap();
        assert_eq!(fx.image_features(&img).unwrap().len(), 48);
        assert_eq!(fx.input_features(&toks(&["a"]), &img).unwrap().len(), 72);
    }

    #[test]
    fn constant_image_pools_to_its_value() {
        let fx = FeatureExtractor {
            channels: 1,
            ..FeatureExtractor::default()
        };
        let img = ImageTensor::filled(8, 8, 1, 0.625).unwrap();
        let feats = fx.image_features(&img).unwrap();
        assert!(feats.iter().all(|&f| (f - 0.625).abs() < 1e-15));
    }

    #[test]
    fn patch_means_reflect_region_content() {
        let fx = FeatureExtractor {
            patch_grid: 2,
            channels: 1,
            ..FeatureExtractor::default()
        };
        let mut img = ImageTensor::filled(4, 4, 1, 0.0).unwrap();
        // Light up the top-left 2x2 quadrant.
        for y in 0..2 {
            for x in 0..2 {
                img.set(y, x, 0, 1.0);
            }
        }
        let feats = fx.image_features(&img).unwrap();
        assert_eq!(feats, vec![1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn word_order_does_not_matter_but_content_does() {
        let fx = FeatureExtractor::default();
        let ab = fx.text_features(&toks(&["red", "car"]));
        let ba = fx.text_features(&toks(&["car", "red"]));
        assert_eq!(ab, ba);
        let other = fx.text_features(&toks(&["blue", "car"]));
        assert_ne!(ab, other);
    }

    #[test]
    fn channel_mismatch_is_rejected() {
        let fx = FeatureExtractor::default();
        let gray = ImageTensor::filled(4, 4, 1, 0.5).unwrap();
        assert!(fx.image_features(&gray).is_err());
    }

    #[test]
    fn empty_prompt_gives_zero_text_features() {
        let fx = FeatureExtractor::default();
        assert!(fx.text_features(&vec![]).iter().all(|&v| v == 0.0));
    }
}
