//! Modality-fair preference optimization at desk scale.
//!
//! The pipeline builds fine-grained image-preference data and trains small
//! differentiable policies on a joint text/image/margin preference
//! objective:
//!
//! 1. [`keyrank`] — rank the words of each chosen response over a weighted
//!    multipartite graph and keep the top-k keywords.
//! 2. [`perturb`] — map keywords to image regions through a pluggable mask
//!    provider and corrupt those regions with forward-diffusion noise to
//!    produce the dispreferred image.
//! 3. [`losses`] — pairwise reward-model and DPO baselines plus the joint
//!    text, image, and margin losses with exact gradients.
//! 4. [`curriculum`] — entropy-scored easy/medium/hard bucketing and the
//!    easy-to-hard schedule.
//! 5. [`train`] — the deterministic trainer, synthetic task generator,
//!    ablation presets, and plot-data reports.
//!
//! Everything random flows through the counter-based generator in [`rng`],
//! so identical seeds reproduce identical artifacts, bit for bit.

pub mod curriculum;
pub mod data;
pub mod error;
pub mod keyrank;
pub mod losses;
pub mod perturb;
pub mod policy;
pub mod rng;
pub mod train;

pub use error::{Error, Result};
