//! Decoding and encoding of the on-disk raster formats: 8/16-bit grayscale
//! and RGB PNG, baseline JPEG. Stored code values map linearly to `[0, 1]`
//! by dividing by the type maximum.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use image::{DynamicImage, ImageBuffer, Luma};
#[cfg(test)]
use image::Rgb;

use crate::error::{Error, Result};
use crate::maskops::LabelMap;
use crate::raster::{BinaryMask, Image};

/// Output encoding for [`save_image`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Png,
    /// Baseline JPEG at the given quality (1..=100).
    Jpeg { quality: u8 },
}

fn open(path: &Path) -> Result<DynamicImage> {
    image::open(path).map_err(|e| Error::Decode { path: path.to_path_buf(), reason: e.to_string() })
}

/// Decodes a PNG or JPEG file into an [`Image`]. Grayscale stays 1-channel,
/// color becomes 3-channel; alpha and palette variants are rejected.
pub fn load_image(path: impl AsRef<Path>) -> Result<Image> {
    let path = path.as_ref();
    let (width, height, channels, data) = decode_samples(path)?;
    Image::new(width, height, channels, data)
}

fn decode_samples(path: &Path) -> Result<(usize, usize, usize, Vec<f64>)> {
    let img = open(path)?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let unsupported = |what: &str| Error::Decode {
        path: path.to_path_buf(),
        reason: format!("unsupported color type {}", what),
    };
    let (channels, data): (usize, Vec<f64>) = match img {
        DynamicImage::ImageLuma8(b) => (1, b.into_raw().iter().map(|v| *v as f64 / 255.0).collect()),
        DynamicImage::ImageRgb8(b) => (3, b.into_raw().iter().map(|v| *v as f64 / 255.0).collect()),
        DynamicImage::ImageLuma16(b) => {
            (1, b.into_raw().iter().map(|v| *v as f64 / 65535.0).collect())
        }
        DynamicImage::ImageRgb16(b) => {
            (3, b.into_raw().iter().map(|v| *v as f64 / 65535.0).collect())
        }
        DynamicImage::ImageLumaA8(_) | DynamicImage::ImageLumaA16(_) => {
            return Err(unsupported("grayscale+alpha"))
        }
        DynamicImage::ImageRgba8(_) | DynamicImage::ImageRgba16(_) => {
            return Err(unsupported("rgba"))
        }
        _ => return Err(unsupported("non-integer or exotic")),
    };
    Ok((w, h, channels, data))
}

fn quantize8(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Writes an image as an 8-bit PNG or JPEG file.
pub fn save_image(img: &Image, path: impl AsRef<Path>, format: OutputFormat) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_image(img, format)?;
    std::fs::write(path, bytes)
        .map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

/// Encodes an image to in-memory PNG or JPEG bytes (the stream-record payload
/// uses this directly).
pub fn encode_image(img: &Image, format: OutputFormat) -> Result<Vec<u8>> {
    let w = img.width() as u32;
    let h = img.height() as u32;
    let raw: Vec<u8> = img.data().iter().map(|v| quantize8(*v)).collect();
    let mut out = Vec::new();
    match format {
        OutputFormat::Png => {
            let enc = image::codecs::png::PngEncoder::new(&mut out);
            let color = if img.channels() == 1 {
                image::ExtendedColorType::L8
            } else {
                image::ExtendedColorType::Rgb8
            };
            image::ImageEncoder::write_image(enc, &raw, w, h, color)
                .map_err(|e| Error::Argument(format!("png encode failed: {}", e)))?;
        }
        OutputFormat::Jpeg { quality } => {
            if quality == 0 || quality > 100 {
                return Err(Error::Argument(format!("jpeg quality {} outside 1..=100", quality)));
            }
            let enc = image::codecs::jpeg::JpegEncoder::new_with_quality(&mut out, quality);
            let color = if img.channels() == 1 {
                image::ExtendedColorType::L8
            } else {
                image::ExtendedColorType::Rgb8
            };
            image::ImageEncoder::write_image(enc, &raw, w, h, color)
                .map_err(|e| Error::Argument(format!("jpeg encode failed: {}", e)))?;
        }
    }
    Ok(out)
}

/// Decodes in-memory PNG/JPEG bytes (the inverse of [`encode_image`]).
pub fn decode_image(bytes: &[u8]) -> Result<Image> {
    let img = image::load_from_memory(bytes).map_err(|e| Error::Decode {
        path: "<memory>".into(),
        reason: e.to_string(),
    })?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    match img {
        DynamicImage::ImageLuma8(b) => {
            Image::new(w, h, 1, b.into_raw().iter().map(|v| *v as f64 / 255.0).collect())
        }
        DynamicImage::ImageRgb8(b) => {
            Image::new(w, h, 3, b.into_raw().iter().map(|v| *v as f64 / 255.0).collect())
        }
        other => Err(Error::Decode {
            path: "<memory>".into(),
            reason: format!("unsupported decoded color type {:?}", other.color()),
        }),
    }
}

/// Loads a binary mask: pixel is true iff its normalized value >= `threshold`.
/// Accepts grayscale PNGs and RGB PNGs whose channels agree.
pub fn load_mask(path: impl AsRef<Path>, threshold: f64) -> Result<BinaryMask> {
    let path = path.as_ref();
    let gray = load_gray(path)?;
    let data = gray.data().iter().map(|v| *v >= threshold).collect();
    BinaryMask::new(gray.width(), gray.height(), data)
}

/// Serializes a mask as 8-bit grayscale PNG: 0 = sharp, 255 = blurred.
pub fn save_mask(mask: &BinaryMask, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_mask(mask)?;
    std::fs::write(path, bytes)
        .map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

/// PNG bytes of a mask, {0, 255} coded.
pub fn encode_mask(mask: &BinaryMask) -> Result<Vec<u8>> {
    let raw: Vec<u8> = mask.data().iter().map(|v| if *v { 255 } else { 0 }).collect();
    let mut out = Vec::new();
    let enc = image::codecs::png::PngEncoder::new(&mut out);
    image::ImageEncoder::write_image(
        enc,
        &raw,
        mask.width() as u32,
        mask.height() as u32,
        image::ExtendedColorType::L8,
    )
    .map_err(|e| Error::Argument(format!("png encode failed: {}", e)))?;
    Ok(out)
}

/// Loads a single-channel-interpretable PNG as a 1-channel float image
/// (prediction maps are ingested this way). Multi-channel input with unequal
/// channels is a format error.
pub fn load_gray(path: impl AsRef<Path>) -> Result<Image> {
    let path = path.as_ref();
    let (w, h, channels, data) = decode_samples(path)?;
    if channels == 1 {
        return Image::new(w, h, 1, data);
    }
    let mut gray = Vec::with_capacity(w * h);
    for px in data.chunks_exact(3) {
        if px[0] != px[1] || px[1] != px[2] {
            return Err(Error::Format {
                path: path.to_path_buf(),
                reason: "multi-channel image with unequal channels is not single-channel-interpretable"
                    .into(),
            });
        }
        gray.push(px[0]);
    }
    Image::new(w, h, 1, gray)
}

/// Writes a 1-channel map as 16-bit grayscale PNG, preserving prediction
/// ranking far beyond 8-bit quantization.
pub fn save_gray16(img: &Image, path: impl AsRef<Path>) -> Result<()> {
    if img.channels() != 1 {
        return Err(Error::Argument("save_gray16 requires a 1-channel image".into()));
    }
    let path = path.as_ref();
    let raw: Vec<u16> =
        img.data().iter().map(|v| (v.clamp(0.0, 1.0) * 65535.0).round() as u16).collect();
    let buf: ImageBuffer<Luma<u16>, Vec<u16>> =
        ImageBuffer::from_raw(img.width() as u32, img.height() as u32, raw)
            .expect("raster invariants guarantee matching length");
    let file = File::create(path).map_err(|e| Error::io(format!("creating {}", path.display()), e))?;
    let enc = image::codecs::png::PngEncoder::new(BufWriter::new(file));
    image::ImageEncoder::write_image(
        enc,
        &bytemuck_cast_u16(&buf),
        img.width() as u32,
        img.height() as u32,
        image::ExtendedColorType::L16,
    )
    .map_err(|e| Error::Argument(format!("png encode failed: {}", e)))
}

// image's encoder takes 16-bit samples as native-endian bytes.
fn bytemuck_cast_u16(buf: &ImageBuffer<Luma<u16>, Vec<u16>>) -> Vec<u8> {
    let mut out = Vec::with_capacity(buf.len() * 2);
    for v in buf.as_raw() {
        out.extend_from_slice(&v.to_ne_bytes());
    }
    out
}

/// Loads a label map: raw 8/16-bit grayscale code values, 0 = background.
pub fn load_label_map(path: impl AsRef<Path>) -> Result<LabelMap> {
    let path = path.as_ref();
    let img = open(path)?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let data: Vec<u32> = match img {
        DynamicImage::ImageLuma8(b) => b.into_raw().iter().map(|v| *v as u32).collect(),
        DynamicImage::ImageLuma16(b) => b.into_raw().iter().map(|v| *v as u32).collect(),
        other => {
            return Err(Error::Decode {
                path: path.to_path_buf(),
                reason: format!("label maps must be 8/16-bit grayscale, got {:?}", other.color()),
            })
        }
    };
    LabelMap::new(w, h, data)
}

/// Peak signal-to-noise ratio in dB over all samples (MAX = 1.0).
/// Identical inputs give +inf.
pub fn psnr(a: &Image, b: &Image) -> Result<f64> {
    if a.width() != b.width() || a.height() != b.height() || a.channels() != b.channels() {
        return Err(Error::Argument("psnr requires matching dimensions".into()));
    }
    let mse: f64 = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        / a.data().len() as f64;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(-10.0 * mse.log10())
}
