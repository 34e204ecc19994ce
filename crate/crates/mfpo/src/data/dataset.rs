//! Line-delimited JSON dataset files.
//!
//! One JSON object per line with keys `id`, `prompt`, `chosen`, `rejected`
//! (arrays of strings), `image` (relative path or inline `{h,w,c,data}`
//! tensor), optional `perturbed_image`, `keywords`, `masks`, `entropy`, and
//! `difficulty`. Masks are stored as single-channel images where value > 0.5
//! means "in region".

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::codec::{self, ImageCodec, InlineTensor};
use crate::data::image::ImageTensor;
use crate::data::sample::{Difficulty, Keyword, PreferenceSample};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum ImageRef {
    Path(String),
    Inline(InlineTensor),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct MaskRec {
    keyword: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    path: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    mask: Option<InlineTensor>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SampleRec {
    id: String,
    prompt: Vec<String>,
    chosen: Vec<String>,
    rejected: Vec<String>,
    image: ImageRef,
    #[serde(skip_serializing_if = "Option::is_none")]
    perturbed_image: Option<ImageRef>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    keywords: Vec<Keyword>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    masks: Vec<MaskRec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    entropy: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    difficulty: Option<Difficulty>,
}

fn resolve_image(r: ImageRef, base: &Path) -> Result<ImageTensor> {
    match r {
        ImageRef::Inline(t) => t.into_image(),
        ImageRef::Path(p) => {
            let bytes = fs::read(base.join(&p))?;
            codec::decode_image(&bytes)
        }
    }
}

fn rec_to_sample(rec: SampleRec, base: &Path) -> Result<PreferenceSample> {
    let image = resolve_image(rec.image, base)?;
    let perturbed_image = rec
        .perturbed_image
        .map(|r| resolve_image(r, base))
        .transpose()?;
    let mut masks = Vec::with_capacity(rec.masks.len());
    for m in rec.masks {
        let img = match (m.mask, m.path) {
            (Some(t), _) => t.into_image()?,
            (None, Some(p)) => codec::decode_image(&fs::read(base.join(&p))?)?,
            (None, None) => {
                return Err(Error::InvalidSample {
                    id: rec.id.clone(),
                    reason: format!("mask `{}` has neither inline data nor a path", m.keyword),
                })
            }
        };
        masks.push(codec::mask_from_image(&img, m.keyword)?);
    }
    let sample = PreferenceSample {
        id: rec.id,
        prompt: rec.prompt,
        chosen: rec.chosen,
        rejected: rec.rejected,
        image,
        perturbed_image,
        keywords: rec.keywords,
        masks,
        entropy: rec.entropy,
        difficulty: rec.difficulty,
    };
    sample.validate()?;
    Ok(sample)
}

/// Load every sample from a JSONL file, in file order. Malformed lines are
/// reported with their 1-based line number; invariant violations with the
/// offending sample id.
pub fn load_dataset(path: impl AsRef<Path>) -> Result<Vec<PreferenceSample>> {
    let path = path.as_ref();
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let reader = BufReader::new(File::open(path)?);
    let mut samples = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: SampleRec = serde_json::from_str(&line).map_err(|e| Error::MalformedRecord {
            line: idx + 1,
            reason: e.to_string(),
        })?;
        samples.push(rec_to_sample(rec, base)?);
    }
    Ok(samples)
}

fn sample_to_rec(sample: &PreferenceSample, inline: impl Fn(&ImageTensor) -> ImageRef) -> SampleRec {
    SampleRec {
        id: sample.id.clone(),
        prompt: sample.prompt.clone(),
        chosen: sample.chosen.clone(),
        rejected: sample.rejected.clone(),
        image: inline(&sample.image),
        perturbed_image: sample.perturbed_image.as_ref().map(&inline),
        keywords: sample.keywords.clone(),
        masks: sample
            .masks
            .iter()
            .map(|m| MaskRec {
                keyword: m.keyword().to_string(),
                path: None,
                mask: Some(InlineTensor::from_image(&codec::mask_to_image(m))),
            })
            .collect(),
        entropy: sample.entropy,
        difficulty: sample.difficulty,
    }
}

/// Save samples as JSONL with all images inlined through the exact float
/// codec, so `load_dataset(save_dataset(s))` reproduces `s` field for field.
pub fn save_dataset(samples: &[PreferenceSample], path: impl AsRef<Path>) -> Result<()> {
    let mut out = BufWriter::new(File::create(path.as_ref())?);
    for sample in samples {
        sample.validate()?;
        let rec = sample_to_rec(sample, |img| ImageRef::Inline(InlineTensor::from_image(img)));
        serde_json::to_writer(&mut out, &rec)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

/// Save samples as JSONL with images written as 8-bit PNG files under
/// `<dataset dir>/<images_subdir>/`, referenced by relative path. Pixel
/// values round-trip within 1/255.
pub fn save_dataset_with_images(
    samples: &[PreferenceSample],
    path: impl AsRef<Path>,
    images_subdir: &str,
) -> Result<()> {
    let path = path.as_ref();
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let img_dir: PathBuf = base.join(images_subdir);
    fs::create_dir_all(&img_dir)?;

    let mut out = BufWriter::new(File::create(path)?);
    for sample in samples {
        sample.validate()?;
        let write_png = |img: &ImageTensor, name: String| -> Result<ImageRef> {
            let bytes = codec::encode_image(img, ImageCodec::Png8)?;
            fs::write(img_dir.join(&name), bytes)?;
            Ok(ImageRef::Path(format!("{images_subdir}/{name}")))
        };
        let mut rec = sample_to_rec(sample, |img| ImageRef::Inline(InlineTensor::from_image(img)));
        rec.image = write_png(&sample.image, format!("{}.png", sample.id))?;
        if let Some(p) = &sample.perturbed_image {
            rec.perturbed_image = Some(write_png(p, format!("{}_perturbed.png", sample.id))?);
        }
        for (i, m) in sample.masks.iter().enumerate() {
            let name = format!("{}_mask{}.png", sample.id, i);
            write_png(&codec::mask_to_image(m), name.clone())?;
            rec.masks[i] = MaskRec {
                keyword: m.keyword().to_string(),
                path: Some(format!("{images_subdir}/{name}")),
                mask: None,
            };
        }
        serde_json::to_writer(&mut out, &rec)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}
