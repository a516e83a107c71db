//! Joint image/mask augmentations: random affine with flip, crop-resize to
//! the training resolution, color jitter, and JPEG round-trip augmentation.
//!
//! The image is resampled bilinearly and the mask nearest-neighbor, so masks
//! stay exactly boolean. Order in [`augment_pair`]: affine -> crop-resize ->
//! color jitter -> JPEG, keeping codec artifacts in the emitted sample.

use rand::Rng;

use crate::config::AugmentConfig;
use crate::error::{Error, Result};
use crate::io::{decode_image, encode_image, OutputFormat};
use crate::raster::{bilinear_clamp, bilinear_reflect, BinaryMask, Image};

/// One concrete affine draw. The forward model is
/// `q = c + t + R(theta) * s * F * (p - c)` about the image center `c`,
/// with `F` the optional horizontal flip.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineParams {
    pub rotation_deg: f64,
    pub translate_px: (f64, f64),
    pub scale: f64,
    pub hflip: bool,
}

impl AffineParams {
    pub fn identity() -> Self {
        AffineParams { rotation_deg: 0.0, translate_px: (0.0, 0.0), scale: 1.0, hflip: false }
    }
}

/// Draws affine parameters from the configured ranges (five variates:
/// rotation, tx, ty, scale, flip).
pub fn sample_affine_params(
    cfg: &AugmentConfig,
    width: usize,
    height: usize,
    rng: &mut impl Rng,
) -> AffineParams {
    let rot = if cfg.rotation_max_deg > 0.0 {
        rng.random_range(-cfg.rotation_max_deg..cfg.rotation_max_deg)
    } else {
        let _: f64 = rng.random();
        0.0
    };
    let t = cfg.translation_max_frac;
    let tx = if t > 0.0 {
        rng.random_range(-t..t) * width as f64
    } else {
        let _: f64 = rng.random();
        0.0
    };
    let ty = if t > 0.0 {
        rng.random_range(-t..t) * height as f64
    } else {
        let _: f64 = rng.random();
        0.0
    };
    let scale = if cfg.scale_min < cfg.scale_max {
        rng.random_range(cfg.scale_min..cfg.scale_max)
    } else {
        let _: f64 = rng.random();
        cfg.scale_min
    };
    let hflip = rng.random::<f64>() < cfg.hflip_prob;
    AffineParams { rotation_deg: rot, translate_px: (tx, ty), scale, hflip }
}

/// Applies the same affine to both rasters: image bilinear with reflect-101
/// outside the frame, mask nearest-neighbor with false outside.
pub fn apply_affine(img: &Image, mask: &BinaryMask, params: &AffineParams) -> (Image, BinaryMask) {
    let w = img.width();
    let h = img.height();
    debug_assert_eq!((mask.width(), mask.height()), (w, h));
    let cx = (w as f64 - 1.0) / 2.0;
    let cy = (h as f64 - 1.0) / 2.0;
    let a = params.rotation_deg.to_radians();
    let (sin, cos) = a.sin_cos();
    let inv_s = 1.0 / params.scale;
    let (tx, ty) = params.translate_px;
    let flip = if params.hflip { -1.0 } else { 1.0 };

    // Inverse of the forward model: p = c + F * R(-theta) * (q - c - t) / s.
    let map = |qx: f64, qy: f64| -> (f64, f64) {
        let dx = qx - cx - tx;
        let dy = qy - cy - ty;
        let rx = (cos * dx + sin * dy) * inv_s;
        let ry = (-sin * dx + cos * dy) * inv_s;
        (cx + flip * rx, cy + ry)
    };

    let planes: Vec<Vec<f64>> = (0..img.channels())
        .map(|c| {
            let plane = img.plane(c);
            let mut out = vec![0.0; w * h];
            for y in 0..h {
                for x in 0..w {
                    let (sx, sy) = map(x as f64, y as f64);
                    out[y * w + x] = bilinear_reflect(&plane, w, h, sx, sy).clamp(0.0, 1.0);
                }
            }
            out
        })
        .collect();
    let img_out = Image::from_planes(w, h, &planes);

    let mut mask_out = BinaryMask::filled(w, h, false).expect("dims validated");
    for y in 0..h {
        for x in 0..w {
            let (sx, sy) = map(x as f64, y as f64);
            let nx = (sx + 0.5).floor() as isize;
            let ny = (sy + 0.5).floor() as isize;
            if nx >= 0 && ny >= 0 && (nx as usize) < w && (ny as usize) < h {
                mask_out.set(x, y, mask.get(nx as usize, ny as usize));
            }
        }
    }
    (img_out, mask_out)
}

/// Random affine over the configured ranges.
pub fn random_affine(
    img: &Image,
    mask: &BinaryMask,
    cfg: &AugmentConfig,
    rng: &mut impl Rng,
) -> (Image, BinaryMask) {
    let params = sample_affine_params(cfg, img.width(), img.height(), rng);
    apply_affine(img, mask, &params)
}

/// One concrete photometric draw.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JitterParams {
    pub brightness: f64,
    pub contrast: f64,
    pub saturation: f64,
}

pub fn sample_jitter_params(cfg: &AugmentConfig, rng: &mut impl Rng) -> JitterParams {
    let mut draw = |lo: f64, hi: f64| -> f64 {
        let u: f64 = rng.random();
        lo + u * (hi - lo)
    };
    let brightness = draw(cfg.brightness_min, cfg.brightness_max);
    let contrast = draw(cfg.contrast_min, cfg.contrast_max);
    let saturation = draw(cfg.saturation_min, cfg.saturation_max);
    JitterParams { brightness, contrast, saturation }
}

/// Brightness (multiplicative), contrast about mid-gray 0.5, saturation
/// toward per-pixel luma; the final result clamps to [0, 1]. Saturation is
/// skipped on single-channel input.
pub fn apply_jitter(img: &Image, params: &JitterParams) -> Image {
    // Unit factors are exact no-ops, so an identity draw returns the input
    // bit-for-bit.
    let bright = |v: f64| if params.brightness == 1.0 { v } else { v * params.brightness };
    let contrast =
        |v: f64| if params.contrast == 1.0 { v } else { 0.5 + params.contrast * (v - 0.5) };
    let channels = img.channels();
    let mut data = Vec::with_capacity(img.data().len());
    if channels == 1 {
        for v in img.data() {
            data.push(contrast(bright(*v)).clamp(0.0, 1.0));
        }
    } else {
        for px in img.data().chunks_exact(3) {
            let mut p = [0.0f64; 3];
            for c in 0..3 {
                p[c] = contrast(bright(px[c]));
            }
            if params.saturation != 1.0 {
                let luma = 0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2];
                for v in &mut p {
                    *v = luma + params.saturation * (*v - luma);
                }
            }
            for v in &mut p {
                *v = v.clamp(0.0, 1.0);
            }
            data.extend_from_slice(&p);
        }
    }
    Image::from_raw_clamped(img.width(), img.height(), channels, data)
}

/// Color jitter with factors drawn from the configured ranges (three
/// variates, consumed regardless of channel count).
pub fn color_jitter(img: &Image, cfg: &AugmentConfig, rng: &mut impl Rng) -> Image {
    let params = sample_jitter_params(cfg, rng);
    apply_jitter(img, &params)
}

/// Bilinear resize with half-pixel centers; same-size resize is the identity.
pub(crate) fn resize_bilinear(img: &Image, out_w: usize, out_h: usize) -> Image {
    let w = img.width();
    let h = img.height();
    let sx = w as f64 / out_w as f64;
    let sy = h as f64 / out_h as f64;
    let planes: Vec<Vec<f64>> = (0..img.channels())
        .map(|c| {
            let plane = img.plane(c);
            let mut out = vec![0.0; out_w * out_h];
            for y in 0..out_h {
                let src_y = (y as f64 + 0.5) * sy - 0.5;
                for x in 0..out_w {
                    let src_x = (x as f64 + 0.5) * sx - 0.5;
                    out[y * out_w + x] =
                        bilinear_clamp(&plane, w, h, src_x, src_y).clamp(0.0, 1.0);
                }
            }
            out
        })
        .collect();
    Image::from_planes(out_w, out_h, &planes)
}

pub(crate) fn resize_nearest(mask: &BinaryMask, out_w: usize, out_h: usize) -> BinaryMask {
    let w = mask.width();
    let h = mask.height();
    let sx = w as f64 / out_w as f64;
    let sy = h as f64 / out_h as f64;
    let mut out = BinaryMask::filled(out_w, out_h, false).expect("caller passes nonzero dims");
    for y in 0..out_h {
        let src_y = ((y as f64 + 0.5) * sy - 0.5 + 0.5).floor().clamp(0.0, (h - 1) as f64);
        for x in 0..out_w {
            let src_x = ((x as f64 + 0.5) * sx - 0.5 + 0.5).floor().clamp(0.0, (w - 1) as f64);
            out.set(x, y, mask.get(src_x as usize, src_y as usize));
        }
    }
    out
}

/// One concrete crop draw, in source-image pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CropWindow {
    pub x0: usize,
    pub y0: usize,
    pub width: usize,
    pub height: usize,
}

pub fn sample_crop_window(
    cfg: &AugmentConfig,
    width: usize,
    height: usize,
    rng: &mut impl Rng,
) -> CropWindow {
    let mut draw_frac = || -> f64 {
        let u: f64 = rng.random();
        cfg.crop_frac_min + u * (cfg.crop_frac_max - cfg.crop_frac_min)
    };
    let fw = draw_frac();
    let fh = draw_frac();
    let cw = ((fw * width as f64).round() as usize).clamp(1, width);
    let ch = ((fh * height as f64).round() as usize).clamp(1, height);
    let ux: f64 = rng.random();
    let uy: f64 = rng.random();
    let x0 = (ux * (width - cw + 1) as f64).floor() as usize;
    let y0 = (uy * (height - ch + 1) as f64).floor() as usize;
    CropWindow { x0: x0.min(width - cw), y0: y0.min(height - ch), width: cw, height: ch }
}

pub fn apply_crop_resize(
    img: &Image,
    mask: &BinaryMask,
    window: &CropWindow,
    out_size: usize,
) -> (Image, BinaryMask) {
    let mut crop_data = Vec::with_capacity(window.width * window.height * img.channels());
    for y in window.y0..window.y0 + window.height {
        for x in window.x0..window.x0 + window.width {
            for c in 0..img.channels() {
                crop_data.push(img.get(x, y, c));
            }
        }
    }
    let crop = Image::new(window.width, window.height, img.channels(), crop_data)
        .expect("crop window stays in bounds");
    let mut mask_data = Vec::with_capacity(window.width * window.height);
    for y in window.y0..window.y0 + window.height {
        for x in window.x0..window.x0 + window.width {
            mask_data.push(mask.get(x, y));
        }
    }
    let crop_mask = BinaryMask::new(window.width, window.height, mask_data)
        .expect("crop window stays in bounds");
    (resize_bilinear(&crop, out_size, out_size), resize_nearest(&crop_mask, out_size, out_size))
}

/// Uniformly placed crop covering the configured fraction of each dimension,
/// resized to `out_size` x `out_size` (four variates).
pub fn random_crop_resize(
    img: &Image,
    mask: &BinaryMask,
    cfg: &AugmentConfig,
    out_size: usize,
    rng: &mut impl Rng,
) -> Result<(Image, BinaryMask)> {
    if img.width() < 64 || img.height() < 64 {
        return Err(Error::Argument(format!(
            "crop-resize needs >= 64 px per side, got {}x{}",
            img.width(),
            img.height()
        )));
    }
    let window = sample_crop_window(cfg, img.width(), img.height(), rng);
    Ok(apply_crop_resize(img, mask, &window, out_size))
}

/// With probability `p_apply`, encodes to JPEG at a uniform quality from
/// `quality_range` and decodes back; the mask is untouched by construction.
pub fn jpeg_augment(
    img: &Image,
    quality_range: (u8, u8),
    p_apply: f64,
    rng: &mut impl Rng,
) -> Result<Image> {
    if !(0.0..=1.0).contains(&p_apply) {
        return Err(Error::Argument(format!("p_apply {} outside [0, 1]", p_apply)));
    }
    let (qlo, qhi) = quality_range;
    if qlo < 1 || qhi > 100 || qhi < qlo {
        return Err(Error::Argument(format!("quality range [{}, {}] invalid", qlo, qhi)));
    }
    let u: f64 = rng.random();
    if u >= p_apply {
        return Ok(img.clone());
    }
    let quality = rng.random_range(qlo..=qhi);
    let bytes = encode_image(img, OutputFormat::Jpeg { quality })?;
    decode_image(&bytes)
}

/// The full augmentation chain applied to one synthesized pair.
pub fn augment_pair(
    img: &Image,
    mask: &BinaryMask,
    cfg: &AugmentConfig,
    out_size: usize,
    rng: &mut impl Rng,
) -> Result<(Image, BinaryMask)> {
    let (img, mask) = random_affine(img, mask, cfg, rng);
    let (img, mask) = random_crop_resize(&img, &mask, cfg, out_size, rng)?;
    let img = color_jitter(&img, cfg, rng);
    let img = jpeg_augment(&img, (cfg.jpeg_quality_min, cfg.jpeg_quality_max), cfg.jpeg_prob, rng)?;
    Ok((img, mask))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn pattern_image(w: usize, h: usize) -> Image {
        let data: Vec<f64> = (0..w * h).map(|i| ((i * 31 + 7) % 97) as f64 / 96.0).collect();
        Image::new(w, h, 1, data).unwrap()
    }

    fn pattern_mask(w: usize, h: usize) -> BinaryMask {
        BinaryMask::new(w, h, (0..w * h).map(|i| (i * 13) % 5 < 2).collect()).unwrap()
    }

    #[test]
    fn identity_affine_is_exact() {
        let img = pattern_image(9, 7);
        let mask = pattern_mask(9, 7);
        let (oi, om) = apply_affine(&img, &mask, &AffineParams::identity());
        assert_eq!(oi.data(), img.data());
        assert_eq!(om, mask);
    }

    #[test]
    fn pure_hflip_reverses_columns() {
        let img = pattern_image(8, 5);
        let mask = pattern_mask(8, 5);
        let params = AffineParams { hflip: true, ..AffineParams::identity() };
        let (oi, om) = apply_affine(&img, &mask, &params);
        assert_eq!(oi.data(), img.hflip().data());
        assert_eq!(om, mask.hflip());
    }

    #[test]
    fn quarter_rotation_matches_index_permutation_oracle() {
        // 90 degrees about the center of a square maps (x, y) -> (y, k-1-x)
        // in the source (inverse mapping), up to floating epsilon.
        let img = pattern_image(4, 4);
        let mask = pattern_mask(4, 4);
        let params = AffineParams { rotation_deg: 90.0, ..AffineParams::identity() };
        let (oi, om) = apply_affine(&img, &mask, &params);
        for y in 0..4 {
            for x in 0..4 {
                let sx = y;
                let sy = 3 - x;
                assert!(
                    (oi.get(x, y, 0) - img.get(sx, sy, 0)).abs() < 1e-9,
                    "image at ({}, {})",
                    x,
                    y
                );
                assert_eq!(om.get(x, y), mask.get(sx, sy), "mask at ({}, {})", x, y);
            }
        }
    }

    #[test]
    fn jitter_identity_factors() {
        let img = pattern_image(6, 6);
        let params = JitterParams { brightness: 1.0, contrast: 1.0, saturation: 1.0 };
        assert_eq!(apply_jitter(&img, &params).data(), img.data());
    }

    #[test]
    fn jitter_brightness_clamps() {
        let img = Image::filled(2, 2, 1, 0.9).unwrap();
        let params = JitterParams { brightness: 1.2, contrast: 1.0, saturation: 1.0 };
        for v in apply_jitter(&img, &params).data() {
            assert_eq!(*v, 1.0);
        }
    }

    #[test]
    fn jitter_contrast_hand_value() {
        // 0.5 + 0.8 * (0.7 - 0.5) = 0.66
        let img = Image::filled(1, 1, 1, 0.7).unwrap();
        let params = JitterParams { brightness: 1.0, contrast: 0.8, saturation: 1.0 };
        let out = apply_jitter(&img, &params);
        assert!((out.get(0, 0, 0) - 0.66).abs() < 1e-12);
    }

    #[test]
    fn jitter_saturation_moves_toward_luma() {
        let img = Image::new(1, 1, 3, vec![1.0, 0.0, 0.0]).unwrap();
        let params = JitterParams { brightness: 1.0, contrast: 1.0, saturation: 0.0 };
        let out = apply_jitter(&img, &params);
        let luma = 0.299;
        for c in 0..3 {
            assert!((out.get(0, 0, c) - luma).abs() < 1e-12);
        }
    }

    #[test]
    fn full_window_crop_same_size_is_identity() {
        let img = pattern_image(64, 64);
        let mask = pattern_mask(64, 64);
        let window = CropWindow { x0: 0, y0: 0, width: 64, height: 64 };
        let (oi, om) = apply_crop_resize(&img, &mask, &window, 64);
        assert_eq!(oi.data(), img.data());
        assert_eq!(om, mask);
    }

    #[test]
    fn crop_resize_output_dims_contract() {
        let img = pattern_image(100, 80);
        let mask = pattern_mask(100, 80);
        let cfg = AugmentConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let (oi, om) = random_crop_resize(&img, &mask, &cfg, 224, &mut rng).unwrap();
            assert_eq!((oi.width(), oi.height()), (224, 224));
            assert_eq!((om.width(), om.height()), (224, 224));
        }
    }

    #[test]
    fn crop_resize_rejects_small_input() {
        let img = pattern_image(32, 100);
        let mask = pattern_mask(32, 100);
        let cfg = AugmentConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        assert!(random_crop_resize(&img, &mask, &cfg, 224, &mut rng).is_err());
    }

    #[test]
    fn downscale_by_two_matches_box_oracle() {
        // A 448 -> 224 bilinear downscale with half-pixel centers lands every
        // sample at the midpoint of a 2x2 block, i.e. its plain average.
        let w = 448;
        let data: Vec<f64> =
            (0..w * w).map(|i| if (i % w / 2 + i / w / 2) % 2 == 0 { 1.0 } else { 0.0 }).collect();
        let img = Image::new(w, w, 1, data).unwrap();
        let out = resize_bilinear(&img, 224, 224);
        for y in 0..224 {
            for x in 0..224 {
                let mut acc = 0.0;
                for dy in 0..2 {
                    for dx in 0..2 {
                        acc += img.get(2 * x + dx, 2 * y + dy, 0);
                    }
                }
                assert!(
                    (out.get(x, y, 0) - acc / 4.0).abs() < 1e-6,
                    "at ({}, {})",
                    x,
                    y
                );
            }
        }
    }

    #[test]
    fn jpeg_p_zero_is_identity() {
        let img = pattern_image(16, 16);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let out = jpeg_augment(&img, (30, 95), 0.0, &mut rng).unwrap();
        assert_eq!(out.data(), img.data());
    }

    #[test]
    fn jpeg_quality_100_constant_within_half_step() {
        let img = Image::filled(16, 16, 3, 0.5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let out = jpeg_augment(&img, (100, 100), 1.0, &mut rng).unwrap();
        for (a, b) in img.data().iter().zip(out.data()) {
            assert!((a - b).abs() <= 1.0 / 255.0 + 1e-12);
        }
    }

    #[test]
    fn jpeg_quality_30_perturbs_noise_image() {
        let data: Vec<f64> = (0..32 * 32).map(|i| ((i * 2654435761u64 as usize) % 256) as f64 / 255.0).collect();
        let img = Image::new(32, 32, 1, data).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let out = jpeg_augment(&img, (30, 30), 1.0, &mut rng).unwrap();
        assert_eq!((out.width(), out.height(), out.channels()), (32, 32, 1));
        let mean_abs: f64 = img
            .data()
            .iter()
            .zip(out.data())
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
            / img.data().len() as f64;
        assert!(mean_abs > 0.0);
    }

    #[test]
    fn augmented_mask_stays_boolean_and_aligned() {
        // Build a pair where the mask predicts channel 0 > 0.5, run the full
        // chain minus photometric steps, and check spatial correspondence
        // away from interpolation boundaries.
        let w = 96;
        let mut data = Vec::with_capacity(w * w * 3);
        let mut mask_data = Vec::with_capacity(w * w);
        for y in 0..w {
            for x in 0..w {
                let inside = ((x as f64 - 48.0).powi(2) + (y as f64 - 48.0).powi(2)).sqrt() < 25.0;
                let v = if inside { 0.9 } else { 0.1 };
                data.extend_from_slice(&[v, 0.5, 0.5]);
                mask_data.push(inside);
            }
        }
        let img = Image::new(w, w, 3, data).unwrap();
        let mask = BinaryMask::new(w, w, mask_data).unwrap();
        let mut cfg = AugmentConfig::default();
        cfg.jpeg_prob = 0.0;
        cfg.brightness_min = 1.0;
        cfg.brightness_max = 1.0;
        cfg.contrast_min = 1.0;
        cfg.contrast_max = 1.0;
        cfg.saturation_min = 1.0;
        cfg.saturation_max = 1.0;
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let (oi, om) = augment_pair(&img, &mask, &cfg, 64, &mut rng).unwrap();

        // 1-px interpolation band around the predicate boundary is excused.
        let mut checked = 0usize;
        let mut agree = 0usize;
        for y in 1..63 {
            for x in 1..63 {
                let v = oi.get(x, y, 0);
                if (v - 0.5).abs() < 0.2 {
                    continue; // interpolation band
                }
                let mut boundary = false;
                for dy in -1isize..=1 {
                    for dx in -1isize..=1 {
                        let nv = oi.get((x as isize + dx) as usize, (y as isize + dy) as usize, 0);
                        if (nv > 0.5) != (v > 0.5) {
                            boundary = true;
                        }
                    }
                }
                if boundary {
                    continue;
                }
                checked += 1;
                if (v > 0.5) == om.get(x, y) {
                    agree += 1;
                }
            }
        }
        assert!(checked > 500);
        assert!(
            agree as f64 >= 0.99 * checked as f64,
            "{} / {} aligned",
            agree,
            checked
        );
    }
}
