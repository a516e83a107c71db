//! Image and mask raster types plus the low-level sampling primitives shared
//! by the synthesis, kernel, and augmentation code.
//!
//! Pixel data is stored row-major, channel-interleaved, as `f64` in `[0, 1]`.
//! Values are treated directly as intensities; no colour-space linearization
//! is performed anywhere in the pipeline.

use crate::error::{Error, Result};

/// A decoded image: `width * height * channels` samples in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f64>,
}

impl Image {
    /// Builds an image from raw samples, validating the raster invariants.
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Argument(format!(
                "image dimensions must be nonzero, got {}x{}",
                width, height
            )));
        }
        if channels != 1 && channels != 3 {
            return Err(Error::Argument(format!(
                "image must have 1 or 3 channels, got {}",
                channels
            )));
        }
        if data.len() != width * height * channels {
            return Err(Error::Argument(format!(
                "sample count {} does not match {}x{}x{}",
                data.len(),
                width,
                height,
                channels
            )));
        }
        if let Some(v) = data.iter().find(|v| !v.is_finite() || **v < 0.0 || **v > 1.0) {
            return Err(Error::Argument(format!("sample {} outside [0, 1]", v)));
        }
        Ok(Image { width, height, channels, data })
    }

    /// A constant-valued image.
    pub fn filled(width: usize, height: usize, channels: usize, value: f64) -> Result<Self> {
        Image::new(width, height, channels, vec![value; width * height * channels])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> f64 {
        debug_assert!(x < self.width && y < self.height && c < self.channels);
        self.data[(y * self.width + x) * self.channels + c]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, c: usize, value: f64) {
        debug_assert!(x < self.width && y < self.height && c < self.channels);
        self.data[(y * self.width + x) * self.channels + c] = value;
    }

    /// Extracts one channel as a bare plane.
    pub fn plane(&self, c: usize) -> Vec<f64> {
        assert!(c < self.channels);
        self.data.iter().skip(c).step_by(self.channels).copied().collect()
    }

    /// Rebuilds an image from per-channel planes. Callers guarantee samples
    /// are already clamped to `[0, 1]`.
    pub(crate) fn from_planes(width: usize, height: usize, planes: &[Vec<f64>]) -> Image {
        let channels = planes.len();
        let mut data = vec![0.0; width * height * channels];
        for (c, plane) in planes.iter().enumerate() {
            for (i, v) in plane.iter().enumerate() {
                data[i * channels + c] = *v;
            }
        }
        Image { width, height, channels, data }
    }

    /// BT.601 luma (equal-weight identity for single-channel images).
    pub fn luma(&self) -> Vec<f64> {
        if self.channels == 1 {
            return self.data.clone();
        }
        self.data
            .chunks_exact(3)
            .map(|px| 0.299 * px[0] + 0.587 * px[1] + 0.114 * px[2])
            .collect()
    }

    /// Horizontal mirror, used by test-time augmentation.
    pub fn hflip(&self) -> Image {
        let mut out = self.clone();
        for y in 0..self.height {
            for x in 0..self.width {
                for c in 0..self.channels {
                    out.set(x, y, c, self.get(self.width - 1 - x, y, c));
                }
            }
        }
        out
    }

    pub(crate) fn from_raw_clamped(
        width: usize,
        height: usize,
        channels: usize,
        data: Vec<f64>,
    ) -> Image {
        let data = data.into_iter().map(|v| v.clamp(0.0, 1.0)).collect();
        Image { width, height, channels, data }
    }
}

/// A binary raster; `true` marks the region that receives synthetic blur.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    data: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize, data: Vec<bool>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Argument(format!(
                "mask dimensions must be nonzero, got {}x{}",
                width, height
            )));
        }
        if data.len() != width * height {
            return Err(Error::Argument(format!(
                "mask length {} does not match {}x{}",
                data.len(),
                width,
                height
            )));
        }
        Ok(BinaryMask { width, height, data })
    }

    pub fn filled(width: usize, height: usize, value: bool) -> Result<Self> {
        BinaryMask::new(width, height, vec![value; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[bool] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        debug_assert!(x < self.width && y < self.height);
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: bool) {
        debug_assert!(x < self.width && y < self.height);
        self.data[y * self.width + x] = value;
    }

    pub fn count_true(&self) -> usize {
        self.data.iter().filter(|v| **v).count()
    }

    pub fn complement(&self) -> BinaryMask {
        BinaryMask {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|v| !v).collect(),
        }
    }

    /// True when every pixel is `true` or every pixel is `false`.
    pub fn is_uniform(&self) -> bool {
        let n = self.count_true();
        n == 0 || n == self.width * self.height
    }

    pub fn hflip(&self) -> BinaryMask {
        let mut out = self.clone();
        for y in 0..self.height {
            for x in 0..self.width {
                out.set(x, y, self.get(self.width - 1 - x, y));
            }
        }
        out
    }

    pub fn same_dims(&self, other: &BinaryMask) -> bool {
        self.width == other.width && self.height == other.height
    }
}

/// Reflect-101 index mapping: `-1 -> 1`, `n -> n-2` (edge sample not repeated).
/// Valid whenever `|i|` stays within one full mirror period of the axis.
#[inline]
pub(crate) fn reflect101(i: isize, n: usize) -> usize {
    debug_assert!(n > 0);
    let n = n as isize;
    let mut i = i;
    if i < 0 {
        i = -i;
    }
    if i >= n {
        i = 2 * n - 2 - i;
    }
    debug_assert!((0..n).contains(&i));
    i as usize
}

/// 2D correlation of one plane with a square kernel under reflect-101 padding.
/// Zero taps contribute nothing, so only nonzero entries are visited.
pub(crate) fn correlate2d_reflect(
    src: &[f64],
    width: usize,
    height: usize,
    kernel: &[f64],
    ksize: usize,
) -> Vec<f64> {
    debug_assert_eq!(src.len(), width * height);
    debug_assert_eq!(kernel.len(), ksize * ksize);
    debug_assert!(ksize % 2 == 1);
    let r = (ksize / 2) as isize;

    // Fixed tap order keeps the f64 accumulation order deterministic.
    let taps: Vec<(isize, isize, f64)> = kernel
        .iter()
        .enumerate()
        .filter(|(_, w)| **w != 0.0)
        .map(|(i, w)| ((i / ksize) as isize - r, (i % ksize) as isize - r, *w))
        .collect();

    let mut out = vec![0.0; src.len()];
    let rr = r as usize;
    let interior = width > 2 * rr && height > 2 * rr;
    for y in 0..height {
        for x in 0..width {
            let border = !interior || x < rr || x >= width - rr || y < rr || y >= height - rr;
            let mut acc = 0.0;
            if border {
                for &(dy, dx, w) in &taps {
                    let sy = reflect101(y as isize + dy, height);
                    let sx = reflect101(x as isize + dx, width);
                    acc += w * src[sy * width + sx];
                }
            } else {
                for &(dy, dx, w) in &taps {
                    let sy = (y as isize + dy) as usize;
                    let sx = (x as isize + dx) as usize;
                    acc += w * src[sy * width + sx];
                }
            }
            out[y * width + x] = acc;
        }
    }
    out
}

/// Bilinear read of a plane; coordinates outside the support read as zero.
#[inline]
pub(crate) fn bilinear_zero(src: &[f64], width: usize, height: usize, x: f64, y: f64) -> f64 {
    let x0 = x.floor();
    let y0 = y.floor();
    let fx = x - x0;
    let fy = y - y0;
    let mut acc = 0.0;
    for (dy, wy) in [(0isize, 1.0 - fy), (1, fy)] {
        for (dx, wx) in [(0isize, 1.0 - fx), (1, fx)] {
            let w = wx * wy;
            if w == 0.0 {
                continue;
            }
            let sx = x0 as isize + dx;
            let sy = y0 as isize + dy;
            if sx >= 0 && sy >= 0 && (sx as usize) < width && (sy as usize) < height {
                acc += w * src[sy as usize * width + sx as usize];
            }
        }
    }
    acc
}

/// Bilinear read with reflect-101 extension outside the frame.
#[inline]
pub(crate) fn bilinear_reflect(src: &[f64], width: usize, height: usize, x: f64, y: f64) -> f64 {
    let x0 = x.floor();
    let y0 = y.floor();
    let fx = x - x0;
    let fy = y - y0;
    let mut acc = 0.0;
    for (dy, wy) in [(0isize, 1.0 - fy), (1, fy)] {
        for (dx, wx) in [(0isize, 1.0 - fx), (1, fx)] {
            let w = wx * wy;
            if w == 0.0 {
                continue;
            }
            let sx = reflect_far(x0 as isize + dx, width);
            let sy = reflect_far(y0 as isize + dy, height);
            acc += w * src[sy * width + sx];
        }
    }
    acc
}

/// Reflect-101 that tolerates arbitrarily distant indices.
#[inline]
fn reflect_far(mut i: isize, n: usize) -> usize {
    let n = n as isize;
    if n == 1 {
        return 0;
    }
    let period = 2 * (n - 1);
    i = i.rem_euclid(period);
    if i >= n {
        i = period - i;
    }
    i as usize
}

/// Bilinear read with coordinates clamped to the valid range.
#[inline]
pub(crate) fn bilinear_clamp(src: &[f64], width: usize, height: usize, x: f64, y: f64) -> f64 {
    let x = x.clamp(0.0, (width - 1) as f64);
    let y = y.clamp(0.0, (height - 1) as f64);
    bilinear_zero(src, width, height, x, y)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_zero_dimensions() {
        assert!(Image::new(0, 4, 1, vec![]).is_err());
        assert!(Image::new(4, 0, 3, vec![]).is_err());
        assert!(BinaryMask::new(0, 1, vec![]).is_err());
    }

    #[test]
    fn rejects_out_of_range_samples() {
        assert!(Image::new(1, 1, 1, vec![1.5]).is_err());
        assert!(Image::new(1, 1, 1, vec![f64::NAN]).is_err());
        assert!(Image::new(1, 1, 1, vec![1.0]).is_ok());
    }

    #[test]
    fn rejects_bad_channel_count() {
        assert!(Image::new(1, 1, 2, vec![0.0, 0.0]).is_err());
        assert!(Image::new(1, 1, 4, vec![0.0; 4]).is_err());
    }

    #[test]
    fn reflect101_examples() {
        assert_eq!(reflect101(-1, 5), 1);
        assert_eq!(reflect101(-3, 5), 3);
        assert_eq!(reflect101(5, 5), 3);
        assert_eq!(reflect101(6, 5), 2);
        assert_eq!(reflect101(2, 5), 2);
    }

    #[test]
    fn hflip_reverses_columns() {
        let img = Image::new(3, 1, 1, vec![0.1, 0.5, 0.9]).unwrap();
        assert_eq!(img.hflip().data(), &[0.9, 0.5, 0.1]);
        let mask = BinaryMask::new(3, 1, vec![true, false, false]).unwrap();
        assert_eq!(mask.hflip().data(), &[false, false, true]);
    }

    #[test]
    fn correlation_on_constant_is_identity_for_unit_mass() {
        let src = vec![0.25; 7 * 4];
        let k = vec![1.0 / 9.0; 9];
        let out = correlate2d_reflect(&src, 7, 4, &k, 3);
        for v in out {
            assert!((v - 0.25).abs() < 1e-12);
        }
    }

    #[test]
    fn bilinear_zero_at_integer_coordinates_is_exact() {
        let src = vec![0.0, 0.25, 0.5, 0.75];
        assert_eq!(bilinear_zero(&src, 2, 2, 1.0, 1.0), 0.75);
        assert_eq!(bilinear_zero(&src, 2, 2, -1.0, 0.0), 0.0);
    }
}
