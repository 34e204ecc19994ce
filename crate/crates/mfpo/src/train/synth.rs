//! Seeded synthetic preference task: colored-rectangle images, prompts that
//! name the object, chosen responses that match it and rejected responses
//! that name a distractor, plus the annotation file locating each object.
//!
//! The prompt mentions the true color, so text preferences alone are
//! learnable without the image — the "memorize the text" shortcut that
//! image-preference optimization is supposed to close. Rectangle size and
//! color contrast vary per sample, giving the curriculum a real easy/hard
//! axis.

use crate::data::{ImageTensor, PreferenceSample, TokenSeq};
use crate::error::{Error, Result};
use crate::perturb::AnnotationEntry;
use crate::rng;

#[derive(Debug, Clone)]
pub struct SynthSpec {
    pub n_train: usize,
    pub n_eval: usize,
    /// Square image side length.
    pub image_size: usize,
    /// Object vocabulary: color name and RGB value.
    pub colors: Vec<(String, [f64; 3])>,
    /// Rectangle side range, inclusive.
    pub rect_min: usize,
    pub rect_max: usize,
    /// Background gray level and its uniform noise amplitude.
    pub background: f64,
    pub background_noise: f64,
    /// Pixel noise inside the rectangle.
    pub color_noise: f64,
    /// Lower bound of the per-sample contrast factor scaling the rectangle
    /// color toward the background; low contrast makes a sample hard.
    pub contrast_min: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            n_train: 200,
            n_eval: 400,
            image_size: 32,
            colors: default_colors(),
            rect_min: 8,
            rect_max: 16,
            // The background sits at the clamped-noise fixed point
            // (E[clamp(N(0,1))] ~ 0.316, drifting to ~0.34 mid-schedule), so
            // corrupting a region does not shift overall brightness and the
            // image contrast carries color structure, not exposure.
            background: 0.33,
            background_noise: 0.06,
            color_noise: 0.04,
            contrast_min: 0.25,
            seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.colors.len() < 2 {
            return Err(Error::param("colors", "need at least two colors"));
        }
        if self.rect_min == 0 || self.rect_min > self.rect_max || self.rect_max > self.image_size {
            return Err(Error::param(
                "rect",
                format!(
                    "rectangle range {}..={} does not fit a {} pixel image",
                    self.rect_min, self.rect_max, self.image_size
                ),
            ));
        }
        if !(0.0..=1.0).contains(&self.contrast_min) {
            return Err(Error::param("contrast_min", "must lie in [0, 1]"));
        }
        Ok(())
    }
}

pub fn default_colors() -> Vec<(String, [f64; 3])> {
    [
        ("red", [0.9, 0.1, 0.1]),
        ("green", [0.1, 0.8, 0.1]),
        ("blue", [0.1, 0.2, 0.9]),
        ("yellow", [0.9, 0.9, 0.1]),
        ("cyan", [0.1, 0.85, 0.85]),
        ("magenta", [0.85, 0.1, 0.85]),
        ("orange", [0.95, 0.55, 0.1]),
        ("white", [0.95, 0.95, 0.95]),
    ]
    .into_iter()
    .map(|(name, rgb)| (name.to_string(), rgb))
    .collect()
}

/// Generated task: train and held-out splits plus annotations for both.
#[derive(Debug, Clone)]
pub struct SynthTask {
    pub train: Vec<PreferenceSample>,
    pub eval: Vec<PreferenceSample>,
    pub annotations: Vec<AnnotationEntry>,
}

fn affirm_phrase(color: &str) -> TokenSeq {
    vec![
        "yes".to_string(),
        "a".to_string(),
        color.to_string(),
        "rectangle".to_string(),
    ]
}

fn deny_phrase(color: &str) -> TokenSeq {
    vec![
        "no".to_string(),
        "a".to_string(),
        color.to_string(),
        "rectangle".to_string(),
    ]
}

/// The full candidate-response set the task can emit: an affirming and a
/// denying phrase per color.
pub fn candidate_phrases(spec: &SynthSpec) -> Vec<TokenSeq> {
    let mut out: Vec<TokenSeq> = spec.colors.iter().map(|(n, _)| affirm_phrase(n)).collect();
    out.extend(spec.colors.iter().map(|(n, _)| deny_phrase(n)));
    out
}

fn generate_one(
    spec: &SynthSpec,
    id: String,
    key: u64,
) -> Result<(PreferenceSample, AnnotationEntry)> {
    let n_colors = spec.colors.len();
    let size = spec.image_size;
    let color_idx = rng::index(spec.seed, key, 0, n_colors);
    let offset = 1 + rng::index(spec.seed, key, 1, n_colors - 1);
    let distractor_idx = (color_idx + offset) % n_colors;
    let span = spec.rect_max - spec.rect_min + 1;
    let rect_w = spec.rect_min + rng::index(spec.seed, key, 2, span);
    let rect_h = spec.rect_min + rng::index(spec.seed, key, 3, span);
    let rect_x = rng::index(spec.seed, key, 4, size - rect_w + 1);
    let rect_y = rng::index(spec.seed, key, 5, size - rect_h + 1);
    let contrast = rng::uniform(spec.seed, key, 6, spec.contrast_min, 1.0);

    let (color_name, color_rgb) = &spec.colors[color_idx];
    let (distractor_name, _) = &spec.colors[distractor_idx];

    let mut data = Vec::with_capacity(size * size * 3);
    for y in 0..size {
        for x in 0..size {
            let in_rect = x >= rect_x && x < rect_x + rect_w && y >= rect_y && y < rect_y + rect_h;
            for (ch, &channel_value) in color_rgb.iter().enumerate() {
                let counter = ((y * size + x) * 3 + ch) as u64;
                let value = if in_rect {
                    let target = spec.background + contrast * (channel_value - spec.background);
                    target + rng::uniform(spec.seed, key, 1000 + counter, -spec.color_noise, spec.color_noise)
                } else {
                    spec.background
                        + rng::uniform(
                            spec.seed,
                            key,
                            1000 + counter,
                            -spec.background_noise,
                            spec.background_noise,
                        )
                };
                data.push(value);
            }
        }
    }
    let image = ImageTensor::new(size, size, 3, data)?;

    let prompt: TokenSeq = [
        "does", "the", "image", "contain", "a", color_name, "rectangle",
    ]
    .iter()
    .map(|w| w.to_string())
    .collect();

    let sample = PreferenceSample::new(
        id.clone(),
        prompt,
        affirm_phrase(color_name),
        deny_phrase(distractor_name),
        image,
    )?;
    let annotation = AnnotationEntry {
        image_id: id,
        keyword: color_name.clone(),
        rect: Some([rect_x as i64, rect_y as i64, rect_w as i64, rect_h as i64]),
        mask: None,
    };
    Ok((sample, annotation))
}

/// Generate the seeded task.
pub fn make_synthetic_task(spec: &SynthSpec) -> Result<SynthTask> {
    spec.validate()?;
    let mut train = Vec::with_capacity(spec.n_train);
    let mut eval = Vec::with_capacity(spec.n_eval);
    let mut annotations = Vec::with_capacity(spec.n_train + spec.n_eval);
    for i in 0..spec.n_train {
        let key = rng::compose_key(rng::stream::SYNTH, i as u64);
        let (s, a) = generate_one(spec, format!("train-{i:04}"), key)?;
        train.push(s);
        annotations.push(a);
    }
    for i in 0..spec.n_eval {
        let key = rng::compose_key(rng::stream::SYNTH, (1 << 32) + i as u64);
        let (s, a) = generate_one(spec, format!("eval-{i:04}"), key)?;
        eval.push(s);
        annotations.push(a);
    }
    Ok(SynthTask {
        train,
        eval,
        annotations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::NoiseSchedule;
    use crate::keyrank::{annotate_keywords, HashedNgramEmbedder, KeyrankParams};
    use crate::perturb::{perturb_sample, AnnotationProvider, MaskProvider, PerturbConfig};
    use std::path::PathBuf;

    #[test]
    fn generated_samples_pass_invariants() {
        let spec = SynthSpec {
            n_train: 10,
            n_eval: 4,
            ..SynthSpec::default()
        };
        let task = make_synthetic_task(&spec).unwrap();
        assert_eq!(task.train.len(), 10);
        assert_eq!(task.eval.len(), 4);
        assert_eq!(task.annotations.len(), 14);
        for s in task.train.iter().chain(&task.eval) {
            s.validate().unwrap();
            assert_ne!(s.chosen, s.rejected);
        }
    }

    #[test]
    fn generation_is_seed_deterministic() {
        let spec = SynthSpec {
            n_train: 5,
            n_eval: 2,
            seed: 9,
            ..SynthSpec::default()
        };
        let a = make_synthetic_task(&spec).unwrap();
        let b = make_synthetic_task(&spec).unwrap();
        for (x, y) in a.train.iter().zip(&b.train) {
            assert_eq!(x, y);
        }
        let other = make_synthetic_task(&SynthSpec { seed: 10, ..spec }).unwrap();
        assert_ne!(a.train[0].image, other.train[0].image);
    }

    #[test]
    fn keywords_map_to_nonempty_rectangle_masks() {
        let spec = SynthSpec {
            n_train: 6,
            n_eval: 0,
            ..SynthSpec::default()
        };
        let mut task = make_synthetic_task(&spec).unwrap();
        annotate_keywords(
            &mut task.train,
            &KeyrankParams::default(),
            &HashedNgramEmbedder::default(),
        )
        .unwrap();
        let provider =
            AnnotationProvider::from_entries(task.annotations.clone(), PathBuf::from(".")).unwrap();
        for s in &task.train {
            let color = &s.chosen[2];
            assert!(
                s.keywords.iter().any(|k| &k.word == color),
                "keywords {:?} missed color {color}",
                s.keywords
            );
            let mask = provider.query(&s.id, &s.image, color).unwrap().unwrap();
            assert!(mask.count_set() >= spec.rect_min * spec.rect_min);
        }
    }

    #[test]
    fn perturbation_touches_only_the_annotated_region() {
        let spec = SynthSpec {
            n_train: 3,
            n_eval: 0,
            ..SynthSpec::default()
        };
        let mut task = make_synthetic_task(&spec).unwrap();
        annotate_keywords(
            &mut task.train,
            &KeyrankParams::default(),
            &HashedNgramEmbedder::default(),
        )
        .unwrap();
        let provider =
            AnnotationProvider::from_entries(task.annotations.clone(), PathBuf::from(".")).unwrap();
        let cfg = PerturbConfig::new(NoiseSchedule::linear(1000).unwrap(), 500, 7).unwrap();
        for s in &task.train {
            let out = perturb_sample(s, &provider, &cfg).unwrap();
            let rect = task
                .annotations
                .iter()
                .find(|a| a.image_id == s.id)
                .and_then(|a| a.rect)
                .unwrap();
            let p = out.perturbed_image.as_ref().unwrap();
            let mut changed_inside = 0usize;
            for y in 0..spec.image_size {
                for x in 0..spec.image_size {
                    let inside = (x as i64) >= rect[0]
                        && (x as i64) < rect[0] + rect[2]
                        && (y as i64) >= rect[1]
                        && (y as i64) < rect[1] + rect[3];
                    for ch in 0..3 {
                        let same = p.get(y, x, ch).to_bits() == s.image.get(y, x, ch).to_bits();
                        if inside {
                            changed_inside += usize::from(!same);
                        } else {
                            assert!(same, "pixel outside the region moved");
                        }
                    }
                }
            }
            assert!(changed_inside > 0);
        }
    }
}
