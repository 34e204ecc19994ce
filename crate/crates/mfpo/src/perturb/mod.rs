//! Region mapping and forward-diffusion perturbation.
//!
//! Selected regions of an image are corrupted as
//! `out = sqrt(alpha_bar_t) * in + sqrt(1 - alpha_bar_t) * eps` with
//! standard-normal noise from the counter-based generator, keyed by
//! `(seed, noise key, pixel index)`. Pixels outside the mask are untouched,
//! bit for bit. When no keyword maps to a region, the whole image is noised.

mod provider;

pub use provider::{save_annotations, AnnotationEntry, AnnotationProvider, MaskProvider};

use crate::data::{ImageTensor, NoiseSchedule, PreferenceSample, RegionMask};
use crate::error::{Error, Result};
use crate::rng;

/// Perturbation settings.
#[derive(Debug, Clone)]
pub struct PerturbConfig {
    pub schedule: NoiseSchedule,
    /// Diffusion step index in `[0, len)`.
    pub t: usize,
    pub seed: u64,
    /// Clamp the output into [0, 1]. Disabled only by moment tests.
    pub clamp_output: bool,
    /// Stream key separating noise draws of different samples;
    /// `perturb_sample` sets it from the sample id.
    pub noise_key: u64,
}

impl PerturbConfig {
    pub fn new(schedule: NoiseSchedule, t: usize, seed: u64) -> Result<Self> {
        if t >= schedule.len() {
            return Err(Error::StepOutOfRange {
                t,
                len: schedule.len(),
            });
        }
        Ok(Self {
            schedule,
            t,
            seed,
            clamp_output: true,
            noise_key: 0,
        })
    }

    pub fn without_clamping(mut self) -> Self {
        self.clamp_output = false;
        self
    }

    pub fn with_noise_key(mut self, key: u64) -> Self {
        self.noise_key = key;
        self
    }
}

/// Cumulative signal level `prod_{j=0..t} beta_j` of a schedule.
pub fn alpha_bar(schedule: &NoiseSchedule, t: usize) -> Result<f64> {
    schedule.alpha_bar(t)
}

/// Noise value for one pixel: a pure function of the config and the pixel's
/// flat index, so mask shape and evaluation order cannot change the draw.
#[inline]
fn pixel_noise(cfg: &PerturbConfig, pixel_index: usize) -> f64 {
    rng::normal(
        cfg.seed,
        rng::compose_key(rng::stream::NOISE, cfg.noise_key),
        pixel_index as u64,
    )
}

/// Perturb the masked region of an image. Unmasked pixels are returned
/// bit-identical to the input.
pub fn perturb_region(
    image: &ImageTensor,
    mask: &RegionMask,
    cfg: &PerturbConfig,
) -> Result<ImageTensor> {
    if !mask.matches_image(image) {
        return Err(Error::DimensionMismatch {
            expected: format!("{}x{}", image.height(), image.width()),
            actual: format!("{}x{}", mask.height(), mask.width()),
        });
    }
    let a = cfg.schedule.alpha_bar(cfg.t)?;
    let signal = a.sqrt();
    let noise = (1.0 - a).sqrt();

    let (h, w, c) = image.dims();
    let mut data = image.data().to_vec();
    for y in 0..h {
        for x in 0..w {
            if !mask.is_set(y, x) {
                continue;
            }
            for ch in 0..c {
                let idx = image.pixel_index(y, x, ch);
                let eps = pixel_noise(cfg, idx);
                let v = signal * data[idx] + noise * eps;
                data[idx] = if cfg.clamp_output { v.clamp(0.0, 1.0) } else { v };
            }
        }
    }
    Ok(ImageTensor::new_unclamped(h, w, c, data))
}

/// Query the provider for every keyword of a sample, perturb the union of
/// the masks found (or the whole image when none is found), and return the
/// sample with `perturbed_image` and `masks` filled in. The original image
/// is untouched.
pub fn perturb_sample(
    sample: &PreferenceSample,
    provider: &dyn MaskProvider,
    cfg: &PerturbConfig,
) -> Result<PreferenceSample> {
    if sample.keywords.is_empty() {
        return Err(Error::InvalidSample {
            id: sample.id.clone(),
            reason: "no keywords; run keyword selection first".to_string(),
        });
    }
    let mut masks = Vec::new();
    for kw in &sample.keywords {
        if let Some(mask) = provider.query(&sample.id, &sample.image, &kw.word)? {
            if !mask.matches_image(&sample.image) {
                return Err(Error::Provider {
                    id: sample.id.clone(),
                    reason: format!(
                        "mask for `{}` is {}x{} but the image is {}x{}",
                        kw.word,
                        mask.height(),
                        mask.width(),
                        sample.image.height(),
                        sample.image.width()
                    ),
                });
            }
            masks.push(mask);
        }
    }

    let sample_cfg = cfg
        .clone()
        .with_noise_key(rng::stable_hash(&sample.id));
    let region = if masks.is_empty() {
        RegionMask::full(sample.image.height(), sample.image.width(), "global")?
    } else {
        RegionMask::union_of(&masks)?
    };
    let perturbed = perturb_region(&sample.image, &region, &sample_cfg)?;

    let mut out = sample.clone();
    out.perturbed_image = Some(perturbed);
    out.masks = masks;
    out.validate()?;
    Ok(out)
}

/// Perturb every sample of a dataset.
pub fn perturb_dataset(
    samples: &[PreferenceSample],
    provider: &dyn MaskProvider,
    cfg: &PerturbConfig,
) -> Result<Vec<PreferenceSample>> {
    samples
        .iter()
        .map(|s| perturb_sample(s, provider, cfg))
        .collect()
}
