//! A non-learned blurriness predictor so the generate -> predict -> evaluate
//! loop runs without any external model: blurriness is one minus the
//! squashed multi-scale gradient energy of the smoothed luma.

use crate::error::Result;
use crate::kernel::gaussian_kernel;
use crate::raster::{correlate2d_reflect, reflect101, Image};

/// Default smoothing scales for the gradient pyramid. Blur suppresses fine
/// detail first, so the discriminative energy sits at sub-pixel scales;
/// coarser smoothing mostly measures scene structure that survives blur.
pub const DEFAULT_SCALES: [f64; 2] = [0.3, 0.6];

/// Per-pixel blurriness in [0, 1], higher = more blurred. For each scale
/// the luma is Gaussian-smoothed and the central-difference gradient
/// magnitude taken; energies average across scales and are squashed by
/// b = 1 - e / (e + eps) with eps the image's own mean energy, so the map
/// is exposure-invariant with no free parameter. A constant image maps to
/// all ones.
pub fn sharpness_map(img: &Image, scales: &[f64]) -> Result<Image> {
    let w = img.width();
    let h = img.height();
    let luma = img.luma();
    let mut energy = vec![0.0f64; w * h];
    for &sigma in scales {
        let kernel = gaussian_kernel(sigma)?;
        let smoothed = if kernel.size() < 2 * w && kernel.size() < 2 * h {
            correlate2d_reflect(&luma, w, h, kernel.data(), kernel.size())
        } else {
            luma.clone()
        };
        for y in 0..h {
            for x in 0..w {
                let right = smoothed[y * w + reflect101(x as isize + 1, w)];
                let left = smoothed[y * w + reflect101(x as isize - 1, w)];
                let down = smoothed[reflect101(y as isize + 1, h) * w + x];
                let up = smoothed[reflect101(y as isize - 1, h) * w + x];
                let gx = (right - left) / 2.0;
                let gy = (down - up) / 2.0;
                energy[y * w + x] += (gx * gx + gy * gy).sqrt();
            }
        }
    }
    let n_scales = scales.len().max(1) as f64;
    for e in &mut energy {
        *e /= n_scales;
    }
    let eps = energy.iter().sum::<f64>() / energy.len() as f64;
    let data: Vec<f64> = energy
        .into_iter()
        .map(|e| if e + eps > 0.0 { 1.0 - e / (e + eps) } else { 1.0 })
        .collect();
    Image::new(w, h, 1, data)
}
