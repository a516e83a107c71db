//! Partial-blur synthesis: kernel convolution, fast-marching inpainting,
//! and the naive vs halo-free compositing pipelines.
//!
//! The halo-free pipeline erases the sharp region by inpainting before
//! blurring, so the blur never averages across the sharp/blurred boundary
//! and no halo band is left for a model to latch onto.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::kernel::BlurKernel;
use crate::raster::{correlate2d_reflect, reflect101, BinaryMask, Image};

/// Per-channel 2D correlation with reflect-101 borders, clamped to [0, 1].
/// Numerically separable kernels (Gaussians, axis-aligned lines) take a
/// two-pass route; everything else walks the nonzero taps directly.
pub fn convolve(img: &Image, kernel: &BlurKernel) -> Result<Image> {
    let k = kernel.size();
    if k >= 2 * img.width() || k >= 2 * img.height() {
        return Err(Error::Argument(format!(
            "kernel size {} too large for {}x{} image",
            k,
            img.width(),
            img.height()
        )));
    }
    let w = img.width();
    let h = img.height();
    let separable = separate(kernel);
    let planes: Vec<Vec<f64>> = (0..img.channels())
        .map(|c| {
            let plane = img.plane(c);
            let out = match &separable {
                Some((col, row)) => {
                    let tmp = correlate_rows(&plane, w, h, row);
                    correlate_cols(&tmp, w, h, col)
                }
                None => correlate2d_reflect(&plane, w, h, kernel.data(), k),
            };
            out.into_iter().map(|v| v.clamp(0.0, 1.0)).collect()
        })
        .collect();
    Ok(Image::from_planes(w, h, &planes))
}

// Rank-1 factorization K = col * row^T, if one fits to ~1e-12 relative error.
// The row factor is rescaled so the factored mass equals the kernel mass
// exactly, keeping constants as well preserved as the direct path.
fn separate(kernel: &BlurKernel) -> Option<(Vec<f64>, Vec<f64>)> {
    let k = kernel.size();
    if k == 1 {
        return Some((vec![1.0], vec![kernel.data()[0]]));
    }
    let data = kernel.data();
    let (pivot_idx, pivot) = data
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("kernel is nonempty");
    if *pivot <= 0.0 {
        return None;
    }
    let pr = pivot_idx / k;
    let pc = pivot_idx % k;
    let row: Vec<f64> = (0..k).map(|j| data[pr * k + j]).collect();
    let col: Vec<f64> = (0..k).map(|i| data[i * k + pc] / pivot).collect();
    let tol = 1e-12 * pivot;
    for i in 0..k {
        for j in 0..k {
            if (data[i * k + j] - col[i] * row[j]).abs() > tol {
                return None;
            }
        }
    }
    let mass: f64 = data.iter().sum();
    let fact_mass: f64 = col.iter().sum::<f64>() * row.iter().sum::<f64>();
    let scale = mass / fact_mass;
    Some((col, row.into_iter().map(|v| v * scale).collect()))
}

fn correlate_rows(src: &[f64], w: usize, h: usize, taps: &[f64]) -> Vec<f64> {
    let r = taps.len() / 2;
    let mut out = vec![0.0; src.len()];
    for y in 0..h {
        let line = &src[y * w..(y + 1) * w];
        for x in 0..w {
            let mut acc = 0.0;
            for (t, tap) in taps.iter().enumerate() {
                if *tap == 0.0 {
                    continue;
                }
                let sx = reflect101(x as isize + t as isize - r as isize, w);
                acc += tap * line[sx];
            }
            out[y * w + x] = acc;
        }
    }
    out
}

fn correlate_cols(src: &[f64], w: usize, h: usize, taps: &[f64]) -> Vec<f64> {
    let r = taps.len() / 2;
    let mut out = vec![0.0; src.len()];
    for y in 0..h {
        for (t, tap) in taps.iter().enumerate() {
            if *tap == 0.0 {
                continue;
            }
            let sy = reflect101(y as isize + t as isize - r as isize, h);
            let line = &src[sy * w..(sy + 1) * w];
            let dst = &mut out[y * w..(y + 1) * w];
            for x in 0..w {
                dst[x] += tap * line[x];
            }
        }
    }
    out
}

/// Selects `blurred` where the mask is true and `sharp` elsewhere.
pub fn composite(sharp: &Image, blurred: &Image, mask: &BinaryMask) -> Result<Image> {
    if sharp.width() != blurred.width()
        || sharp.height() != blurred.height()
        || sharp.channels() != blurred.channels()
        || mask.width() != sharp.width()
        || mask.height() != sharp.height()
    {
        return Err(Error::Argument("composite inputs must share dimensions".into()));
    }
    let mut out = sharp.clone();
    for y in 0..sharp.height() {
        for x in 0..sharp.width() {
            if mask.get(x, y) {
                for c in 0..sharp.channels() {
                    out.set(x, y, c, blurred.get(x, y, c));
                }
            }
        }
    }
    Ok(out)
}

const FAR: u8 = 0;
const BAND: u8 = 1;
const ACCEPTED: u8 = 2;

#[derive(PartialEq)]
struct Candidate {
    t: f64,
    idx: usize,
}

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        // Reversed: BinaryHeap pops the smallest arrival time first.
        other.t.total_cmp(&self.t).then_with(|| other.idx.cmp(&self.idx))
    }
}

// One quadrant-wise Eikonal update: solve (T - Ta)^2 + (T - Tb)^2 = 1 using
// accepted neighbors only.
fn solve_step(t: &[f64], state: &[u8], w: usize, h: usize, x: usize, y: usize) -> f64 {
    let fetch = |xx: isize, yy: isize| -> Option<f64> {
        if xx < 0 || yy < 0 || xx >= w as isize || yy >= h as isize {
            return None;
        }
        let idx = yy as usize * w + xx as usize;
        (state[idx] == ACCEPTED).then(|| t[idx])
    };
    let x = x as isize;
    let y = y as isize;
    let mut best = f64::INFINITY;
    for (hx, vy) in [(-1isize, -1isize), (-1, 1), (1, -1), (1, 1)] {
        let a = fetch(x + hx, y);
        let b = fetch(x, y + vy);
        let cand = match (a, b) {
            (Some(ta), Some(tb)) => {
                let d = ta - tb;
                if d.abs() < 1.0 {
                    (ta + tb + (2.0 - d * d).sqrt()) / 2.0
                } else {
                    ta.min(tb) + 1.0
                }
            }
            (Some(ta), None) => ta + 1.0,
            (None, Some(tb)) => tb + 1.0,
            (None, None) => continue,
        };
        best = best.min(cand);
    }
    best
}

/// Fills the `hole` region by the Telea fast-marching method: hole pixels
/// are visited in order of arrival of the Eikonal front from the boundary
/// and each is set to a normalized weighted average of the known pixels in
/// a disk of the given radius, with direction, geometric-distance, and
/// level-set weight factors and a first-order gradient extrapolation term.
pub fn inpaint(img: &Image, hole: &BinaryMask, radius: u32) -> Result<Image> {
    if hole.width() != img.width() || hole.height() != img.height() {
        return Err(Error::Argument("hole mask must match image dimensions".into()));
    }
    if radius == 0 {
        return Err(Error::Argument("inpaint radius must be >= 1".into()));
    }
    let w = img.width();
    let h = img.height();
    let n_hole = hole.count_true();
    if n_hole == 0 {
        return Ok(img.clone());
    }
    if n_hole == w * h {
        return Err(Error::Uninpaintable);
    }

    // Boundary ring: known pixels 4-adjacent to the hole. Seeds both marches.
    let mut ring: Vec<usize> = Vec::new();
    for y in 0..h {
        for x in 0..w {
            if hole.get(x, y) {
                continue;
            }
            let neighbors = [
                (x > 0).then(|| (x - 1, y)),
                (x + 1 < w).then(|| (x + 1, y)),
                (y > 0).then(|| (x, y - 1)),
                (y + 1 < h).then(|| (x, y + 1)),
            ];
            if neighbors.into_iter().flatten().any(|(nx, ny)| hole.get(nx, ny)) {
                ring.push(y * w + x);
            }
        }
    }

    // Pass 1: arrival times on the known side, out to the sampling radius,
    // stored negative so the level-set factor can tell the two sides apart.
    let big = 1e6;
    let mut t = vec![big; w * h];
    let mut state = vec![FAR; w * h];
    let mut heap = BinaryHeap::new();
    for &idx in &ring {
        t[idx] = 0.0;
        state[idx] = BAND;
        heap.push(Candidate { t: 0.0, idx });
    }
    let reach = radius as f64 + 2.0;
    while let Some(Candidate { t: pt, idx }) = heap.pop() {
        if state[idx] == ACCEPTED {
            continue;
        }
        state[idx] = ACCEPTED;
        if pt > reach {
            continue;
        }
        let (x, y) = (idx % w, idx / w);
        for (nx, ny) in neighbors4(x, y, w, h) {
            let nidx = ny * w + nx;
            if state[nidx] == ACCEPTED || hole.get(nx, ny) {
                continue;
            }
            let cand = solve_step(&t, &state, w, h, nx, ny);
            if cand < t[nidx] {
                t[nidx] = cand;
                state[nidx] = BAND;
                heap.push(Candidate { t: cand, idx: nidx });
            }
        }
    }
    let mut tfield = vec![0.0f64; w * h];
    for idx in 0..w * h {
        if !hole.data()[idx] {
            tfield[idx] = if t[idx] >= big { -reach } else { -t[idx] };
        }
    }

    // Pass 2: march into the hole, filling each pixel as it joins the band.
    let mut planes: Vec<Vec<f64>> = (0..img.channels()).map(|c| img.plane(c)).collect();
    let mut t = vec![0.0f64; w * h];
    let mut flags = vec![KNOWN_F; w * h];
    for idx in 0..w * h {
        if hole.data()[idx] {
            t[idx] = big;
            flags[idx] = INSIDE_F;
        }
    }
    let mut state = vec![FAR; w * h];
    let mut heap = BinaryHeap::new();
    for &idx in &ring {
        state[idx] = BAND;
        heap.push(Candidate { t: 0.0, idx });
    }
    let eps = radius as isize;
    let eps2 = (radius as f64) * (radius as f64);
    while let Some(Candidate { t: _, idx }) = heap.pop() {
        if state[idx] == ACCEPTED {
            continue;
        }
        state[idx] = ACCEPTED;
        let (x, y) = (idx % w, idx / w);
        for (nx, ny) in neighbors4(x, y, w, h) {
            let nidx = ny * w + nx;
            if state[nidx] == ACCEPTED || !hole.data()[nidx] {
                continue;
            }
            let cand = solve_step(&t, &state, w, h, nx, ny);
            let improved = cand < t[nidx];
            if improved {
                t[nidx] = cand;
            }
            if flags[nidx] == INSIDE_F {
                tfield[nidx] = t[nidx];
                fill_pixel(&mut planes, &flags, &tfield, w, h, nx, ny, eps, eps2);
                flags[nidx] = FILLED_F;
            }
            if state[nidx] != BAND || improved {
                state[nidx] = BAND;
                heap.push(Candidate { t: t[nidx], idx: nidx });
            }
        }
    }

    let planes: Vec<Vec<f64>> = planes
        .into_iter()
        .map(|p| p.into_iter().map(|v| v.clamp(0.0, 1.0)).collect())
        .collect();
    Ok(Image::from_planes(w, h, &planes))
}

const KNOWN_F: u8 = 0;
const FILLED_F: u8 = 1;
const INSIDE_F: u8 = 2;

fn neighbors4(x: usize, y: usize, w: usize, h: usize) -> impl Iterator<Item = (usize, usize)> {
    [
        (x > 0).then(|| (x - 1, y)),
        (x + 1 < w).then(|| (x + 1, y)),
        (y > 0).then(|| (x, y - 1)),
        (y + 1 < h).then(|| (x, y + 1)),
    ]
    .into_iter()
    .flatten()
}

// Telea's weighted average over the known disk around (x, y):
// w = |dir * dst * lev|, value extrapolated to first order from each donor.
#[allow(clippy::too_many_arguments)]
fn fill_pixel(
    planes: &mut [Vec<f64>],
    flags: &[u8],
    tfield: &[f64],
    w: usize,
    h: usize,
    x: usize,
    y: usize,
    eps: isize,
    eps2: f64,
) {
    let idx = y * w + x;
    let tq = tfield[idx];
    let grad_t = gradient(tfield, flags, w, h, x, y, |f| f != INSIDE_F);
    let channels = planes.len();
    let mut num = vec![0.0f64; channels];
    let mut den = 0.0f64;

    for dy in -eps..=eps {
        let sy = y as isize + dy;
        if sy < 0 || sy >= h as isize {
            continue;
        }
        for dx in -eps..=eps {
            let sx = x as isize + dx;
            if sx < 0 || sx >= w as isize {
                continue;
            }
            let sidx = sy as usize * w + sx as usize;
            if flags[sidx] == INSIDE_F || sidx == idx {
                continue;
            }
            // r runs from the donor p toward the filled pixel q.
            let rx = -(dx as f64);
            let ry = -(dy as f64);
            let len2 = rx * rx + ry * ry;
            if len2 > eps2 {
                continue;
            }
            let len = len2.sqrt();
            let mut dir = (rx * grad_t.0 + ry * grad_t.1) / len;
            if dir.abs() < 1e-6 {
                dir = 1e-6;
            }
            let dst = 1.0 / len2;
            let lev = 1.0 / (1.0 + (tfield[sidx] - tq).abs());
            let weight = (dir * dst * lev).abs();
            for (c, plane) in planes.iter().enumerate() {
                let gi = gradient(plane, flags, w, h, sx as usize, sy as usize, |f| {
                    f != INSIDE_F
                });
                num[c] += weight * (plane[sidx] + gi.0 * rx + gi.1 * ry);
            }
            den += weight;
        }
    }
    if den > 0.0 {
        for (c, plane) in planes.iter_mut().enumerate() {
            plane[idx] = num[c] / den;
        }
    }
}

// Central difference where both neighbors are usable, one-sided otherwise.
fn gradient(
    field: &[f64],
    flags: &[u8],
    w: usize,
    h: usize,
    x: usize,
    y: usize,
    usable: impl Fn(u8) -> bool,
) -> (f64, f64) {
    let idx = y * w + x;
    let ok = |xx: isize, yy: isize| -> Option<f64> {
        if xx < 0 || yy < 0 || xx >= w as isize || yy >= h as isize {
            return None;
        }
        let i = yy as usize * w + xx as usize;
        usable(flags[i]).then(|| field[i])
    };
    let x = x as isize;
    let y = y as isize;
    let gx = match (ok(x + 1, y), ok(x - 1, y)) {
        (Some(a), Some(b)) => (a - b) / 2.0,
        (Some(a), None) => a - field[idx],
        (None, Some(b)) => field[idx] - b,
        (None, None) => 0.0,
    };
    let gy = match (ok(x, y + 1), ok(x, y - 1)) {
        (Some(a), Some(b)) => (a - b) / 2.0,
        (Some(a), None) => a - field[idx],
        (None, Some(b)) => field[idx] - b,
        (None, None) => 0.0,
    };
    (gx, gy)
}

/// Eq-style compositing without halo removal: blur everything, then paste
/// the sharp pixels back. Kept for quantifying the halo artifact.
pub fn synthesize_naive(img: &Image, mask: &BinaryMask, kernel: &BlurKernel) -> Result<Image> {
    let blurred = convolve(img, kernel)?;
    composite(img, &blurred, mask)
}

/// Halo-free synthesis: inpaint the sharp region away, blur the result,
/// composite. The output equals `img` bit-exactly on the sharp region.
pub fn synthesize_halo_free(
    img: &Image,
    mask: &BinaryMask,
    kernel: &BlurKernel,
    inpaint_radius: u32,
) -> Result<Image> {
    if mask.width() != img.width() || mask.height() != img.height() {
        return Err(Error::Argument("mask must match image dimensions".into()));
    }
    if mask.is_uniform() {
        return Err(Error::DegenerateMask);
    }
    let hole = mask.complement();
    let background = inpaint(img, &hole, inpaint_radius)?;
    let blurred = convolve(&background, kernel)?;
    composite(img, &blurred, mask)
}
