//! Shared fixtures for integration tests: procedural "natural" images,
//! blob masks, and on-disk source/proposal/label trees, all seeded.

#![allow(dead_code)]

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use blurgen::io::{save_image, save_mask, OutputFormat};
use blurgen::{BinaryMask, Image};

/// A textured test image: low-frequency color fields, a contrasting
/// geometric figure, and high-frequency noise so sharp regions carry
/// gradient energy everywhere.
pub fn natural_image(seed: u64, w: usize, h: usize) -> Image {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x1111_2222_3333_4444);
    let mut waves = Vec::new();
    for _ in 0..4 {
        waves.push((
            rng.random_range(0.5..3.0) / w as f64,
            rng.random_range(0.5..3.0) / h as f64,
            rng.random_range(0.0..std::f64::consts::TAU),
            rng.random_range(0.1..0.3),
        ));
    }
    let base: [f64; 3] = [
        rng.random_range(0.3..0.6),
        rng.random_range(0.3..0.6),
        rng.random_range(0.3..0.6),
    ];
    let disk = (
        rng.random_range(0.25 * w as f64..0.75 * w as f64),
        rng.random_range(0.25 * h as f64..0.75 * h as f64),
        rng.random_range(0.12 * w as f64..0.2 * w as f64),
        [
            rng.random_range(-0.35..0.35),
            rng.random_range(-0.35..0.35),
            rng.random_range(-0.35..0.35),
        ],
    );
    let mut data = Vec::with_capacity(w * h * 3);
    for y in 0..h {
        for x in 0..w {
            let mut field = 0.0;
            for (fx, fy, phase, amp) in &waves {
                field += amp
                    * (std::f64::consts::TAU * (fx * x as f64 + fy * y as f64) + phase).sin();
            }
            let dx = x as f64 - disk.0;
            let dy = y as f64 - disk.1;
            let inside = (dx * dx + dy * dy).sqrt() < disk.2;
            for c in 0..3 {
                let noise: f64 = rng.random_range(-0.12..0.12);
                let mut v = base[c] + field * (0.5 + 0.2 * c as f64) + noise;
                if inside {
                    v += disk.3[c];
                }
                data.push(v.clamp(0.0, 1.0));
            }
        }
    }
    Image::new(w, h, 3, data).unwrap()
}

/// A smooth blob covering roughly 20-50% of the frame.
pub fn blob_mask(seed: u64, w: usize, h: usize) -> BinaryMask {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5555_6666_7777_8888);
    let cx = rng.random_range(0.3 * w as f64..0.7 * w as f64);
    let cy = rng.random_range(0.3 * h as f64..0.7 * h as f64);
    let r0 = rng.random_range(0.2 * w as f64..0.35 * w as f64);
    let wobble: Vec<(f64, f64)> = (0..3)
        .map(|_| (rng.random_range(0.05..0.25), rng.random_range(0.0..std::f64::consts::TAU)))
        .collect();
    let mut data = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let dx = x as f64 - cx;
            let dy = y as f64 - cy;
            let theta = dy.atan2(dx);
            let mut r = r0;
            for (k, (amp, phase)) in wobble.iter().enumerate() {
                r += r0 * amp * ((k as f64 + 2.0) * theta + phase).sin();
            }
            data.push((dx * dx + dy * dy).sqrt() < r);
        }
    }
    BinaryMask::new(w, h, data).unwrap()
}

/// A centered disk mask (true inside the disk).
pub fn disk_mask(w: usize, h: usize, cx: f64, cy: f64, radius: f64) -> BinaryMask {
    let mut data = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let dx = x as f64 - cx;
            let dy = y as f64 - cy;
            data.push((dx * dx + dy * dy).sqrt() < radius);
        }
    }
    BinaryMask::new(w, h, data).unwrap()
}

/// Writes `n` source images into `dir` as `img_XX.png`.
pub fn write_sources(dir: &Path, n: usize, w: usize, h: usize, seed: u64) {
    std::fs::create_dir_all(dir).unwrap();
    for i in 0..n {
        let img = natural_image(seed.wrapping_add(i as u64), w, h);
        save_image(&img, dir.join(format!("img_{:02}.png", i)), OutputFormat::Png).unwrap();
    }
}

/// Writes per-image proposal sets: `<dir>/img_XX/proposal_YYYY.png` plus
/// `scores.txt` with descending objectness.
pub fn write_proposals(dir: &Path, n_images: usize, w: usize, h: usize, seed: u64) {
    for i in 0..n_images {
        let sub = dir.join(format!("img_{:02}", i));
        std::fs::create_dir_all(&sub).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1000 + i as u64));
        let count = rng.random_range(3..=5usize);
        let mut scores = Vec::new();
        for p in 0..count {
            let mask = blob_mask(seed.wrapping_add((i * 97 + p * 13) as u64), w, h);
            save_mask(&mask, sub.join(format!("proposal_{:04}.png", p))).unwrap();
            scores.push(2.0 - 0.5 * p as f64 + rng.random_range(-0.2..0.2));
        }
        let text: String = scores.iter().map(|s| format!("{}\n", s)).collect();
        std::fs::write(sub.join("scores.txt"), text).unwrap();
    }
}

/// Writes label maps `<dir>/img_XX.png` with two rectangular objects
/// (labels 1 and 2) on background 0, sized so label 1 wins.
pub fn write_labels(dir: &Path, n_images: usize, w: usize, h: usize, seed: u64) {
    std::fs::create_dir_all(dir).unwrap();
    for i in 0..n_images {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(2000 + i as u64));
        let mut data = vec![0u8; w * h];
        let bw = rng.random_range(w / 3..w / 2);
        let bh = rng.random_range(h / 3..h / 2);
        let x0 = rng.random_range(0..w - bw);
        let y0 = rng.random_range(0..h - bh);
        for y in y0..y0 + bh {
            for x in x0..x0 + bw {
                data[y * w + x] = 1;
            }
        }
        let sw = rng.random_range(w / 8..w / 5);
        let sh = rng.random_range(h / 8..h / 5);
        let x1 = rng.random_range(0..w - sw);
        let y1 = rng.random_range(0..h - sh);
        for y in y1..y1 + sh {
            for x in x1..x1 + sw {
                data[y * w + x] = 2;
            }
        }
        let buf: image::ImageBuffer<image::Luma<u8>, Vec<u8>> =
            image::ImageBuffer::from_raw(w as u32, h as u32, data).unwrap();
        buf.save(dir.join(format!("img_{:02}.png", i))).unwrap();
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{:02x}", b)).collect()
}

/// SHA-256 digest over a directory tree: sorted relative paths and bytes.
pub fn tree_digest(root: &Path) -> String {
    let mut files = Vec::new();
    collect_files(root, root, &mut files);
    files.sort();
    let mut hasher = Sha256::new();
    for rel in files {
        hasher.update(rel.as_bytes());
        hasher.update([0]);
        hasher.update(std::fs::read(root.join(&rel)).unwrap());
    }
    hex(&hasher.finalize())
}

fn collect_files(root: &Path, dir: &Path, out: &mut Vec<String>) {
    for entry in std::fs::read_dir(dir).unwrap().filter_map(|e| e.ok()) {
        let path = entry.path();
        if path.is_dir() {
            collect_files(root, &path, out);
        } else {
            out.push(path.strip_prefix(root).unwrap().to_string_lossy().into_owned());
        }
    }
}

pub fn file_digest(path: &Path) -> String {
    let mut hasher = Sha256::new();
    hasher.update(std::fs::read(path).unwrap());
    hex(&hasher.finalize())
}

/// Mean gradient magnitude of the luma over the band of `region` pixels
/// within `band_px` (Chebyshev) of its complement -- the halo statistic.
pub fn boundary_band_gradient(img: &Image, blur_region: &BinaryMask, band_px: usize) -> f64 {
    let w = img.width();
    let h = img.height();
    let luma = img.luma();
    // Dilate the sharp region band_px times (8-neighborhood), intersect with
    // the blurred region.
    let mut frontier: Vec<bool> = blur_region.data().iter().map(|v| !v).collect();
    for _ in 0..band_px {
        let prev = frontier.clone();
        for y in 0..h {
            for x in 0..w {
                if prev[y * w + x] {
                    continue;
                }
                'scan: for dy in -1isize..=1 {
                    for dx in -1isize..=1 {
                        let nx = x as isize + dx;
                        let ny = y as isize + dy;
                        if nx >= 0
                            && ny >= 0
                            && (nx as usize) < w
                            && (ny as usize) < h
                            && prev[ny as usize * w + nx as usize]
                        {
                            frontier[y * w + x] = true;
                            break 'scan;
                        }
                    }
                }
            }
        }
    }
    let mut acc = 0.0;
    let mut n = 0usize;
    for y in 1..h - 1 {
        for x in 1..w - 1 {
            if !(frontier[y * w + x] && blur_region.get(x, y)) {
                continue;
            }
            // The statistic lives on the blurred side: a stencil that reads
            // across the composite boundary would measure the sharp/blur step
            // itself, which both pipelines share.
            if !(blur_region.get(x - 1, y)
                && blur_region.get(x + 1, y)
                && blur_region.get(x, y - 1)
                && blur_region.get(x, y + 1))
            {
                continue;
            }
            let gx = (luma[y * w + x + 1] - luma[y * w + x - 1]) / 2.0;
            let gy = (luma[(y + 1) * w + x] - luma[(y - 1) * w + x]) / 2.0;
            acc += (gx * gx + gy * gy).sqrt();
            n += 1;
        }
    }
    if n == 0 {
        0.0
    } else {
        acc / n as f64
    }
}
