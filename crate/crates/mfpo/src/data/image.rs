//! Dense image tensors and binary region masks.

use crate::error::{Error, Result};

/// Dense pixel array in `[0, 1]` per channel, row-major `H x W x C`.
///
/// Values are clamped into `[0, 1]` on write; non-finite input is rejected.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageTensor {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f64>,
}

impl ImageTensor {
    /// Build a tensor from raw data. Finite values are clamped into `[0, 1]`;
    /// NaN or infinite values, a wrong data length, zero dimensions, or a
    /// channel count other than 1 or 3 are rejected.
    pub fn new(height: usize, width: usize, channels: usize, mut data: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::InvalidImage(format!(
                "dimensions must be positive, got {height}x{width}"
            )));
        }
        if channels != 1 && channels != 3 {
            return Err(Error::InvalidImage(format!(
                "channels must be 1 or 3, got {channels}"
            )));
        }
        let expected = height * width * channels;
        if data.len() != expected {
            return Err(Error::InvalidImage(format!(
                "data length {} does not match {height}x{width}x{channels} = {expected}",
                data.len()
            )));
        }
        for v in &mut data {
            if !v.is_finite() {
                return Err(Error::InvalidImage(format!("non-finite pixel value {v}")));
            }
            *v = v.clamp(0.0, 1.0);
        }
        Ok(Self {
            height,
            width,
            channels,
            data,
        })
    }

    /// Constant-valued tensor.
    pub fn filled(height: usize, width: usize, channels: usize, value: f64) -> Result<Self> {
        Self::new(height, width, channels, vec![value; height * width * channels])
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Flat index of `(y, x, channel)` in the data array. This is also the
    /// noise counter used when perturbing pixel `(y, x, channel)`.
    #[inline]
    pub fn pixel_index(&self, y: usize, x: usize, channel: usize) -> usize {
        (y * self.width + x) * self.channels + channel
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize, channel: usize) -> f64 {
        self.data[self.pixel_index(y, x, channel)]
    }

    /// Write a pixel, clamping into `[0, 1]`.
    #[inline]
    pub fn set(&mut self, y: usize, x: usize, channel: usize, value: f64) {
        let idx = self.pixel_index(y, x, channel);
        self.data[idx] = value.clamp(0.0, 1.0);
    }

    pub fn same_dims(&self, other: &ImageTensor) -> bool {
        self.height == other.height && self.width == other.width && self.channels == other.channels
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.height, self.width, self.channels)
    }

    /// Like `new` but without clamping, for internal paths that must keep
    /// out-of-range values (moment tests with clamping disabled).
    pub(crate) fn new_unclamped(
        height: usize,
        width: usize,
        channels: usize,
        data: Vec<f64>,
    ) -> Self {
        debug_assert_eq!(data.len(), height * width * channels);
        Self {
            height,
            width,
            channels,
            data,
        }
    }
}

/// Binary per-pixel mask selecting the region matched to one keyword.
///
/// An all-false mask is rejected on construction: "no region" is represented
/// by absence, never by an empty mask.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionMask {
    height: usize,
    width: usize,
    bits: Vec<bool>,
    keyword: String,
}

impl RegionMask {
    pub fn new(height: usize, width: usize, bits: Vec<bool>, keyword: impl Into<String>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::InvalidMask(format!(
                "dimensions must be positive, got {height}x{width}"
            )));
        }
        if bits.len() != height * width {
            return Err(Error::InvalidMask(format!(
                "bit count {} does not match {height}x{width}",
                bits.len()
            )));
        }
        if !bits.iter().any(|&b| b) {
            return Err(Error::InvalidMask("all-false mask".to_string()));
        }
        Ok(Self {
            height,
            width,
            bits,
            keyword: keyword.into(),
        })
    }

    /// Mask covering every pixel; the fallback when no keyword region is found.
    pub fn full(height: usize, width: usize, keyword: impl Into<String>) -> Result<Self> {
        Self::new(height, width, vec![true; height * width], keyword)
    }

    /// Rasterize an axis-aligned rectangle `(x, y, w, h)` clipped to the
    /// image bounds. Returns `None` when the clipped rectangle is empty.
    pub fn from_rect(
        height: usize,
        width: usize,
        rect: [i64; 4],
        keyword: impl Into<String>,
    ) -> Option<Self> {
        let [rx, ry, rw, rh] = rect;
        if rw <= 0 || rh <= 0 {
            return None;
        }
        let x0 = rx.max(0) as usize;
        let y0 = ry.max(0) as usize;
        let x1 = (rx + rw).clamp(0, width as i64) as usize;
        let y1 = (ry + rh).clamp(0, height as i64) as usize;
        if x0 >= x1 || y0 >= y1 {
            return None;
        }
        let mut bits = vec![false; height * width];
        for y in y0..y1 {
            for x in x0..x1 {
                bits[y * width + x] = true;
            }
        }
        Self::new(height, width, bits, keyword).ok()
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn keyword(&self) -> &str {
        &self.keyword
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    #[inline]
    pub fn is_set(&self, y: usize, x: usize) -> bool {
        self.bits[y * self.width + x]
    }

    pub fn count_set(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn matches_image(&self, image: &ImageTensor) -> bool {
        self.height == image.height() && self.width == image.width()
    }

    /// Pixel-wise union of a non-empty set of masks with identical dimensions.
    pub fn union_of(masks: &[RegionMask]) -> Result<RegionMask> {
        let first = masks
            .first()
            .ok_or_else(|| Error::InvalidMask("union of zero masks".to_string()))?;
        let mut bits = first.bits.clone();
        let mut keyword = first.keyword.clone();
        for m in &masks[1..] {
            if m.height != first.height || m.width != first.width {
                return Err(Error::DimensionMismatch {
                    expected: format!("{}x{}", first.height, first.width),
                    actual: format!("{}x{}", m.height, m.width),
                });
            }
            for (b, &other) in bits.iter_mut().zip(&m.bits) {
                *b |= other;
            }
            keyword.push('+');
            keyword.push_str(&m.keyword);
        }
        RegionMask::new(first.height, first.width, bits, keyword)
    }
}
