//! Floating point image containers.

use crate::error::{Error, Result};

/// RGB image with `f64` channels, nominally in `[0, 1]`.
///
/// Pixel `(x, y)` covers the square `[x, x+1) x [y, y+1)` in continuous pixel
/// coordinates, so its center sits at `(x + 0.5, y + 0.5)`.
#[derive(Clone, Debug, PartialEq)]
pub struct RgbImage {
    width: usize,
    height: usize,
    data: Vec<[f64; 3]>,
}

impl RgbImage {
    pub fn new(width: usize, height: usize) -> Self {
        Self::filled(width, height, [0.0; 3])
    }

    pub fn filled(width: usize, height: usize, value: [f64; 3]) -> Self {
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn from_pixels(width: usize, height: usize, data: Vec<[f64; 3]>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::Count {
                what: "pixels",
                expected: width * height,
                got: data.len(),
            });
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[[f64; 3]] {
        &self.data
    }

    pub fn pixels_mut(&mut self) -> &mut [[f64; 3]] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> [f64; 3] {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: [f64; 3]) {
        self.data[y * self.width + x] = value;
    }

    pub fn same_size(&self, other: &RgbImage) -> Result<()> {
        if self.width != other.width || self.height != other.height {
            return Err(Error::DimensionMismatch(
                self.width,
                self.height,
                other.width,
                other.height,
            ));
        }
        Ok(())
    }

    /// Bilinear sample at continuous pixel coordinates with border clamping.
    ///
    /// Sampling exactly at a pixel center returns that pixel bit-for-bit.
    pub fn sample_bilinear(&self, x: f64, y: f64) -> [f64; 3] {
        let (x0, x1, tx) = bilinear_taps(x, self.width);
        let (y0, y1, ty) = bilinear_taps(y, self.height);
        let p00 = self.get(x0, y0);
        let p10 = self.get(x1, y0);
        let p01 = self.get(x0, y1);
        let p11 = self.get(x1, y1);
        let mut out = [0.0; 3];
        for c in 0..3 {
            let top = p00[c] * (1.0 - tx) + p10[c] * tx;
            let bottom = p01[c] * (1.0 - tx) + p11[c] * tx;
            out[c] = top * (1.0 - ty) + bottom * ty;
        }
        out
    }
}

/// Returns the two clamped taps and the blend weight for coordinate `x`.
#[inline]
pub(crate) fn bilinear_taps(x: f64, len: usize) -> (usize, usize, f64) {
    let max = len.saturating_sub(1) as f64;
    let s = (x - 0.5).clamp(0.0, max);
    let i0 = s.floor();
    let t = s - i0;
    let i0 = i0 as usize;
    let i1 = (i0 + 1).min(len - 1);
    (i0, i1, t)
}

/// Square RGB texture map with `f32` texels, sampled by `uv` in `[0, 1]^2`.
#[derive(Clone, Debug, PartialEq)]
pub struct Texture {
    width: usize,
    height: usize,
    data: Vec<[f32; 3]>,
}

impl Texture {
    pub fn from_texels(width: usize, height: usize, data: Vec<[f32; 3]>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::ZeroArea);
        }
        if data.len() != width * height {
            return Err(Error::Count {
                what: "texels",
                expected: width * height,
                got: data.len(),
            });
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn texels(&self) -> &[[f32; 3]] {
        &self.data
    }

    #[inline]
    pub fn texel(&self, x: usize, y: usize) -> [f32; 3] {
        self.data[y * self.width + x]
    }

    /// Bilinear lookup; `u` runs along the width, `v` along the height.
    #[inline]
    pub fn sample(&self, u: f64, v: f64) -> [f64; 3] {
        let (x0, x1, tx) = bilinear_taps(u * self.width as f64, self.width);
        let (y0, y1, ty) = bilinear_taps(v * self.height as f64, self.height);
        let p00 = self.texel(x0, y0);
        let p10 = self.texel(x1, y0);
        let p01 = self.texel(x0, y1);
        let p11 = self.texel(x1, y1);
        let mut out = [0.0; 3];
        for c in 0..3 {
            let top = p00[c] as f64 * (1.0 - tx) + p10[c] as f64 * tx;
            let bottom = p01[c] as f64 * (1.0 - tx) + p11[c] as f64 * tx;
            out[c] = top * (1.0 - ty) + bottom * ty;
        }
        out
    }
}
