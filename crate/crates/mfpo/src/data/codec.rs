//! Image codecs: 8-bit PNG for real pipelines, exact JSON float tensors for
//! tests and inline dataset storage.

use std::io::Cursor;

use serde::{Deserialize, Serialize};

use crate::data::image::{ImageTensor, RegionMask};
use crate::error::{Error, Result};

/// Inline tensor form shared by the JSON codec and dataset records.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InlineTensor {
    pub h: usize,
    pub w: usize,
    pub c: usize,
    pub data: Vec<f64>,
}

impl InlineTensor {
    pub fn from_image(img: &ImageTensor) -> Self {
        Self {
            h: img.height(),
            w: img.width(),
            c: img.channels(),
            data: img.data().to_vec(),
        }
    }

    pub fn into_image(self) -> Result<ImageTensor> {
        ImageTensor::new(self.h, self.w, self.c, self.data)
    }
}

/// Available byte encodings.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImageCodec {
    /// 8-bit grayscale/RGB PNG. Round-trips within 1/255 per element.
    Png8,
    /// JSON float tensor. Round-trips exactly.
    JsonF64,
}

const PNG_MAGIC: &[u8] = &[0x89, b'P', b'N', b'G'];

/// Encode an image with the chosen codec.
pub fn encode_image(img: &ImageTensor, codec: ImageCodec) -> Result<Vec<u8>> {
    match codec {
        ImageCodec::JsonF64 => Ok(serde_json::to_vec(&InlineTensor::from_image(img))?),
        ImageCodec::Png8 => {
            let (h, w, c) = img.dims();
            let quantize = |v: f64| (v * 255.0).round() as u8;
            let mut cursor = Cursor::new(Vec::new());
            match c {
                1 => {
                    let buf: Vec<u8> = img.data().iter().map(|&v| quantize(v)).collect();
                    let gray = image::GrayImage::from_raw(w as u32, h as u32, buf)
                        .ok_or_else(|| Error::Codec("gray buffer size mismatch".to_string()))?;
                    gray.write_to(&mut cursor, image::ImageFormat::Png)
                        .map_err(|e| Error::Codec(e.to_string()))?;
                }
                3 => {
                    let buf: Vec<u8> = img.data().iter().map(|&v| quantize(v)).collect();
                    let rgb = image::RgbImage::from_raw(w as u32, h as u32, buf)
                        .ok_or_else(|| Error::Codec("rgb buffer size mismatch".to_string()))?;
                    rgb.write_to(&mut cursor, image::ImageFormat::Png)
                        .map_err(|e| Error::Codec(e.to_string()))?;
                }
                other => return Err(Error::Codec(format!("unsupported channel count {other}"))),
            }
            Ok(cursor.into_inner())
        }
    }
}

/// Decode image bytes, sniffing the codec from the leading bytes.
pub fn decode_image(bytes: &[u8]) -> Result<ImageTensor> {
    if bytes.starts_with(PNG_MAGIC) {
        let dynamic = image::load_from_memory_with_format(bytes, image::ImageFormat::Png)
            .map_err(|e| Error::Codec(format!("png decode: {e}")))?;
        let (tensor, channels) = match dynamic {
            image::DynamicImage::ImageLuma8(g) => {
                let (w, h) = (g.width() as usize, g.height() as usize);
                let data: Vec<f64> = g.into_raw().iter().map(|&b| f64::from(b) / 255.0).collect();
                ((h, w, data), 1)
            }
            other => {
                let rgb = other.to_rgb8();
                let (w, h) = (rgb.width() as usize, rgb.height() as usize);
                let data: Vec<f64> =
                    rgb.into_raw().iter().map(|&b| f64::from(b) / 255.0).collect();
                ((h, w, data), 3)
            }
        };
        let (h, w, data) = tensor;
        ImageTensor::new(h, w, channels, data)
    } else {
        let inline: InlineTensor =
            serde_json::from_slice(bytes).map_err(|e| Error::Codec(format!("json decode: {e}")))?;
        inline.into_image()
    }
}

/// Render a mask as a single-channel image (1.0 inside the region).
pub fn mask_to_image(mask: &RegionMask) -> ImageTensor {
    let data: Vec<f64> = mask.bits().iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
    ImageTensor::new(mask.height(), mask.width(), 1, data)
        .expect("mask dimensions are valid by construction")
}

/// Read a mask back from a single-channel image: value > 0.5 means in-region.
pub fn mask_from_image(img: &ImageTensor, keyword: impl Into<String>) -> Result<RegionMask> {
    if img.channels() != 1 {
        return Err(Error::InvalidMask(format!(
            "mask images must be single-channel, got {}",
            img.channels()
        )));
    }
    let bits: Vec<bool> = img.data().iter().map(|&v| v > 0.5).collect();
    RegionMask::new(img.height(), img.width(), bits, keyword)
}
