//! Mask providers: the interface standing in for a segmentation model, and
//! the annotation-file implementation that ships with the pipeline.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::{self, ImageTensor, RegionMask};
use crate::error::{Error, Result};

/// Maps a keyword to its visual region in one image. Returning `Ok(None)`
/// means "no region found" (the caller falls back to global noise); `Err` is
/// a provider failure and aborts the sample.
pub trait MaskProvider {
    fn query(&self, image_id: &str, image: &ImageTensor, keyword: &str) -> Result<Option<RegionMask>>;
}

/// One annotation record: a rectangle or a mask-image path for an
/// (image id, keyword) pair.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnnotationEntry {
    pub image_id: String,
    pub keyword: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rect: Option<[i64; 4]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mask: Option<String>,
}

#[derive(Debug, Clone)]
enum MaskSource {
    Rect([i64; 4]),
    Path(PathBuf),
}

/// Provider backed by a JSON annotation file: an array of entries with
/// either `rect: [x, y, w, h]` or `mask: <path>`. Keyword lookup is
/// case-insensitive.
#[derive(Debug, Clone)]
pub struct AnnotationProvider {
    sources: HashMap<(String, String), MaskSource>,
}

impl AnnotationProvider {
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)?;
        let entries: Vec<AnnotationEntry> =
            serde_json::from_str(&text).map_err(|e| Error::MalformedRecord {
                line: e.line(),
                reason: format!("annotation file: {e}"),
            })?;
        let base = path.parent().unwrap_or_else(|| Path::new(".")).to_path_buf();
        Self::from_entries(entries, base)
    }

    /// Build from in-memory entries; mask paths resolve against `base`.
    pub fn from_entries(entries: Vec<AnnotationEntry>, base: PathBuf) -> Result<Self> {
        let mut sources = HashMap::new();
        for entry in entries {
            let source = match (entry.rect, entry.mask) {
                (Some(rect), None) => MaskSource::Rect(rect),
                (None, Some(mask)) => MaskSource::Path(base.join(mask)),
                _ => {
                    return Err(Error::param(
                        "annotations",
                        format!(
                            "entry ({}, {}) must have exactly one of rect or mask",
                            entry.image_id, entry.keyword
                        ),
                    ))
                }
            };
            sources.insert((entry.image_id, entry.keyword.to_lowercase()), source);
        }
        Ok(Self { sources })
    }

    pub fn len(&self) -> usize {
        self.sources.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sources.is_empty()
    }
}

impl MaskProvider for AnnotationProvider {
    fn query(&self, image_id: &str, image: &ImageTensor, keyword: &str) -> Result<Option<RegionMask>> {
        let key = (image_id.to_string(), keyword.to_lowercase());
        let Some(source) = self.sources.get(&key) else {
            return Ok(None);
        };
        match source {
            MaskSource::Rect(rect) => Ok(RegionMask::from_rect(
                image.height(),
                image.width(),
                *rect,
                keyword.to_lowercase(),
            )),
            MaskSource::Path(path) => {
                let bytes = fs::read(path).map_err(|e| Error::Provider {
                    id: image_id.to_string(),
                    reason: format!("mask file {}: {e}", path.display()),
                })?;
                let img = data::decode_image(&bytes).map_err(|e| Error::Provider {
                    id: image_id.to_string(),
                    reason: e.to_string(),
                })?;
                let mask = data::mask_from_image(&img, keyword.to_lowercase()).map_err(|e| {
                    Error::Provider {
                        id: image_id.to_string(),
                        reason: e.to_string(),
                    }
                })?;
                if !mask.matches_image(image) {
                    return Err(Error::Provider {
                        id: image_id.to_string(),
                        reason: format!(
                            "mask file {} is {}x{} but the image is {}x{}",
                            path.display(),
                            mask.height(),
                            mask.width(),
                            image.height(),
                            image.width()
                        ),
                    });
                }
                Ok(Some(mask))
            }
        }
    }
}

/// Write annotation entries as a JSON file.
pub fn save_annotations(entries: &[AnnotationEntry], path: impl AsRef<Path>) -> Result<()> {
    let json = serde_json::to_string_pretty(entries)?;
    fs::write(path, json)?;
    Ok(())
}
