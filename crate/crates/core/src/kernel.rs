//! Blur point-spread functions: isotropic Gaussians for defocus and
//! elastically deformed rotated lines for non-linear motion, plus the
//! randomized specification that names one blur event.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::BlurConfig;
use crate::error::{Error, Result};
use crate::raster::bilinear_zero;

/// A square, odd-sized, non-negative stencil with unit mass.
#[derive(Debug, Clone, PartialEq)]
pub struct BlurKernel {
    size: usize,
    data: Vec<f64>,
}

impl BlurKernel {
    pub fn new(size: usize, data: Vec<f64>) -> Result<Self> {
        if size == 0 || size % 2 == 0 {
            return Err(Error::Argument(format!("kernel size {} must be odd and positive", size)));
        }
        if data.len() != size * size {
            return Err(Error::Argument(format!(
                "kernel data length {} does not match {0}x{0}",
                size
            )));
        }
        if data.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Argument("kernel entries must be finite and non-negative".into()));
        }
        let sum: f64 = data.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Argument(format!("kernel mass {} differs from 1 by > 1e-9", sum)));
        }
        Ok(BlurKernel { size, data })
    }

    fn normalized(size: usize, mut data: Vec<f64>) -> Result<Self> {
        for v in &mut data {
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        let sum: f64 = data.iter().sum();
        if sum <= 0.0 {
            return Err(Error::DegenerateKernel);
        }
        for v in &mut data {
            *v /= sum;
        }
        Ok(BlurKernel { size, data })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.size + x]
    }

    /// Single-pixel identity kernel.
    pub fn delta() -> BlurKernel {
        BlurKernel { size: 1, data: vec![1.0] }
    }
}

/// Smooth per-pixel offsets applied to the kernel grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DisplacementField {
    size: usize,
    dx: Vec<f64>,
    dy: Vec<f64>,
}

impl DisplacementField {
    pub fn new(size: usize, dx: Vec<f64>, dy: Vec<f64>) -> Result<Self> {
        if size == 0 || size % 2 == 0 {
            return Err(Error::Argument(format!("field size {} must be odd and positive", size)));
        }
        if dx.len() != size * size || dy.len() != size * size {
            return Err(Error::Argument("field component length must be size*size".into()));
        }
        let limit = size as f64 / 2.0;
        for (a, b) in dx.iter().zip(&dy) {
            if !a.is_finite() || !b.is_finite() {
                return Err(Error::Argument("field offsets must be finite".into()));
            }
            if (a * a + b * b).sqrt() > limit + 1e-9 {
                return Err(Error::Argument(format!(
                    "field magnitude exceeds half the support ({:.3} > {:.3})",
                    (a * a + b * b).sqrt(),
                    limit
                )));
            }
        }
        Ok(DisplacementField { size, dx, dy })
    }

    pub fn zero(size: usize) -> Result<Self> {
        DisplacementField::new(size, vec![0.0; size * size], vec![0.0; size * size])
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn dx(&self) -> &[f64] {
        &self.dx
    }

    pub fn dy(&self) -> &[f64] {
        &self.dy
    }

    pub fn max_magnitude(&self) -> f64 {
        self.dx
            .iter()
            .zip(&self.dy)
            .map(|(a, b)| (a * a + b * b).sqrt())
            .fold(0.0, f64::max)
    }
}

/// Generating parameters of an elastic field: enough to re-realize the exact
/// same field (and therefore the exact same kernel) from a manifest record.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ElasticSpec {
    pub seed: u64,
    pub amplitude: f64,
    pub smoothness: f64,
}

impl ElasticSpec {
    pub fn realize(&self, size: usize) -> Result<DisplacementField> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        random_displacement_field(size, self.amplitude, self.smoothness, &mut rng)
    }
}

/// The randomized parameterization of one blur event.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum BlurSpec {
    Defocus { sigma: f64 },
    Motion { length: u32, angle_deg: f64, elastic: ElasticSpec },
}

impl BlurSpec {
    pub fn kind_name(&self) -> &'static str {
        match self {
            BlurSpec::Defocus { .. } => "defocus",
            BlurSpec::Motion { .. } => "motion",
        }
    }
}

/// Isotropic Gaussian kernel sampled at integer offsets, truncated at
/// radius ceil(3*sigma) and renormalized.
pub fn gaussian_kernel(sigma: f64) -> Result<BlurKernel> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::Argument(format!("sigma {} must be positive", sigma)));
    }
    let r = (3.0 * sigma).ceil() as isize;
    let k = (2 * r + 1) as usize;
    let inv = 1.0 / (2.0 * sigma * sigma);
    let mut data = Vec::with_capacity(k * k);
    for y in -r..=r {
        for x in -r..=r {
            data.push((-((x * x + y * y) as f64) * inv).exp());
        }
    }
    BlurKernel::normalized(k, data)
}

/// A centered horizontal line of m pixels, each 1/m. Even m gets support
/// m+1 with the line offset toward lower column indices.
pub fn linear_motion_kernel(m: u32) -> Result<BlurKernel> {
    if m < 1 {
        return Err(Error::Argument("motion length must be >= 1".into()));
    }
    let m = m as usize;
    let k = if m % 2 == 1 { m } else { m + 1 };
    let mut data = vec![0.0; k * k];
    let row = k / 2;
    let start = (k - m) / 2;
    for x in start..start + m {
        data[row * k + x] = 1.0 / m as f64;
    }
    BlurKernel::normalized(k, data)
}

/// Rotates a kernel about its center by `alpha_deg` with bilinear
/// resampling; negatives are clipped and the result renormalized.
pub fn rotate_kernel(kernel: &BlurKernel, alpha_deg: f64) -> BlurKernel {
    let k = kernel.size();
    let c = (k as f64 - 1.0) / 2.0;
    let a = alpha_deg.to_radians();
    let (sin, cos) = a.sin_cos();
    let mut data = Vec::with_capacity(k * k);
    for i in 0..k {
        for j in 0..k {
            let x = j as f64 - c;
            let y = i as f64 - c;
            // Inverse rotation of the output coordinate.
            let xs = cos * x + sin * y;
            let ys = -sin * x + cos * y;
            data.push(bilinear_zero(kernel.data(), k, k, c + xs, c + ys));
        }
    }
    BlurKernel::normalized(k, data)
        .expect("rotation of a centered kernel keeps positive mass in the support")
}

/// Backward-warp of the kernel through the displacement field:
/// out(x, y) = K(x + dx, y + dy), zero outside the support, renormalized.
pub fn elastic_deform_kernel(
    kernel: &BlurKernel,
    field: &DisplacementField,
) -> Result<BlurKernel> {
    if field.size() != kernel.size() {
        return Err(Error::Argument(format!(
            "field size {} does not match kernel size {}",
            field.size(),
            kernel.size()
        )));
    }
    let k = kernel.size();
    let mut data = Vec::with_capacity(k * k);
    for i in 0..k {
        for j in 0..k {
            let idx = i * k + j;
            let x = j as f64 + field.dx()[idx];
            let y = i as f64 + field.dy()[idx];
            data.push(bilinear_zero(kernel.data(), k, k, x, y));
        }
    }
    BlurKernel::normalized(k, data)
}

/// Draws i.i.d. uniform [-1, 1] offsets, Gaussian-smooths them, and rescales
/// so the largest offset magnitude equals `amplitude` exactly.
pub fn random_displacement_field(
    k: usize,
    amplitude: f64,
    smoothness: f64,
    rng: &mut impl Rng,
) -> Result<DisplacementField> {
    if k == 0 || k % 2 == 0 {
        return Err(Error::Argument(format!("field size {} must be odd and positive", k)));
    }
    if amplitude < 0.0 || !amplitude.is_finite() {
        return Err(Error::Argument("amplitude must be >= 0".into()));
    }
    if !(smoothness > 0.0) {
        return Err(Error::Argument("smoothness must be > 0".into()));
    }
    if amplitude > k as f64 / 2.0 {
        return Err(Error::Argument(format!(
            "amplitude {} exceeds half the support {}",
            amplitude,
            k as f64 / 2.0
        )));
    }
    // The draws happen unconditionally so the stream position after this
    // call does not depend on the amplitude.
    let n = k * k;
    let mut dx: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut dy: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    if amplitude == 0.0 {
        return DisplacementField::zero(k);
    }
    let smoothing = gaussian_kernel(smoothness)?;
    dx = smooth_plane(&dx, k, &smoothing);
    dy = smooth_plane(&dy, k, &smoothing);
    let max = dx
        .iter()
        .zip(&dy)
        .map(|(a, b)| (a * a + b * b).sqrt())
        .fold(0.0, f64::max);
    if max == 0.0 {
        return DisplacementField::zero(k);
    }
    let scale = amplitude / max;
    for v in dx.iter_mut().chain(dy.iter_mut()) {
        *v *= scale;
    }
    DisplacementField::new(k, dx, dy)
}

// Correlation with periodic reflection; the smoothing kernel may be larger
// than the field itself, so the index mapping must tolerate any offset.
fn smooth_plane(src: &[f64], k: usize, kernel: &BlurKernel) -> Vec<f64> {
    let ks = kernel.size();
    let r = (ks / 2) as isize;
    let mut out = vec![0.0; src.len()];
    for y in 0..k as isize {
        for x in 0..k as isize {
            let mut acc = 0.0;
            for dy in -r..=r {
                for dx in -r..=r {
                    let w = kernel.get((dx + r) as usize, (dy + r) as usize);
                    let sy = reflect_any(y + dy, k);
                    let sx = reflect_any(x + dx, k);
                    acc += w * src[sy * k + sx];
                }
            }
            out[y as usize * k + x as usize] = acc;
        }
    }
    out
}

#[inline]
fn reflect_any(mut i: isize, n: usize) -> usize {
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

/// Draws one blur specification from the configured ranges: the kind first,
/// then its parameters. The elastic field is described by a fresh sub-seed so
/// the spec alone re-realizes the kernel bit-exactly.
pub fn sample_blur_spec(cfg: &BlurConfig, rng: &mut impl Rng) -> Result<BlurSpec> {
    cfg.validate()?;
    let u: f64 = rng.random();
    if u < cfg.motion_ratio {
        let length = rng.random_range(cfg.length_min..=cfg.length_max);
        let angle_deg = rng.random_range(0.0..360.0);
        let amp_u: f64 = rng.random();
        let seed: u64 = rng.random();
        let m = length as f64;
        Ok(BlurSpec::Motion {
            length,
            angle_deg,
            elastic: ElasticSpec {
                seed,
                amplitude: amp_u * cfg.elastic_amplitude_frac * m,
                smoothness: cfg.elastic_smoothness_frac * m,
            },
        })
    } else {
        let sigma = if cfg.sigma_min == cfg.sigma_max {
            cfg.sigma_min
        } else {
            rng.random_range(cfg.sigma_min..cfg.sigma_max)
        };
        Ok(BlurSpec::Defocus { sigma })
    }
}

/// Realizes the kernel a spec describes. Pure in the spec: the same spec
/// always yields the same kernel.
pub fn realize_kernel(spec: &BlurSpec) -> Result<BlurKernel> {
    match spec {
        BlurSpec::Defocus { sigma } => gaussian_kernel(*sigma),
        BlurSpec::Motion { length, angle_deg, elastic } => {
            let line = linear_motion_kernel(*length)?;
            let rotated = rotate_kernel(&line, *angle_deg);
            let field = elastic.realize(rotated.size())?;
            elastic_deform_kernel(&rotated, &field)
        }
    }
}
