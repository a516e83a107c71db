//! Property tests for the spec-level invariants that hold over whole input
//! families rather than single examples.

mod common;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use blurgen::evaluation::{average_precision, roc_auc};
use blurgen::kernel::{realize_kernel, sample_blur_spec};
use blurgen::maskops::{
    connected_components, maybe_invert, proposal_distribution, Connectivity,
};
use blurgen::synthesis::{composite, convolve};
use blurgen::{BinaryMask, BlurConfig, Image};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn softmax_is_shift_invariant_and_normalized(
        scores in prop::collection::vec(-20.0f64..20.0, 1..40),
        shift in -50.0f64..50.0,
    ) {
        let p = proposal_distribution(&scores).unwrap();
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let shifted: Vec<f64> = scores.iter().map(|s| s + shift).collect();
        let q = proposal_distribution(&shifted).unwrap();
        for (a, b) in p.iter().zip(&q) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn components_partition_the_true_set(
        bits in prop::collection::vec(any::<bool>(), 36..64),
        eight in any::<bool>(),
    ) {
        let w = 6;
        let h = bits.len() / w;
        let mask = BinaryMask::new(w, h, bits[..w * h].to_vec()).unwrap();
        let connectivity = if eight { Connectivity::Eight } else { Connectivity::Four };
        let comps = connected_components(&mask, connectivity);
        let mut seen = vec![false; w * h];
        for c in &comps {
            prop_assert_eq!(c.pixel_count, c.mask.count_true());
            for (i, v) in c.mask.data().iter().enumerate() {
                if *v {
                    prop_assert!(!seen[i], "components overlap");
                    prop_assert!(mask.data()[i], "component outside input");
                    seen[i] = true;
                }
            }
        }
        let covered = seen.iter().filter(|v| **v).count();
        prop_assert_eq!(covered, mask.count_true());
        for pair in comps.windows(2) {
            prop_assert!(pair[0].pixel_count >= pair[1].pixel_count);
        }
    }

    #[test]
    fn forced_double_inversion_is_identity(
        bits in prop::collection::vec(any::<bool>(), 16),
        seed in any::<u64>(),
    ) {
        let mask = BinaryMask::new(4, 4, bits).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (once, f1) = maybe_invert(&mask, 1.0, &mut rng).unwrap();
        let (twice, f2) = maybe_invert(&once, 1.0, &mut rng).unwrap();
        prop_assert!(f1 && f2);
        prop_assert_eq!(twice, mask);
    }

    #[test]
    fn metrics_invariant_under_strictly_increasing_transform(
        pairs in prop::collection::vec((0.001f64..1.0, any::<bool>()), 4..48),
    ) {
        let scores: Vec<f64> = pairs.iter().map(|(s, _)| *s).collect();
        let labels: Vec<bool> = pairs.iter().map(|(_, l)| *l).collect();
        let pos = labels.iter().filter(|l| **l).count();
        prop_assume!(pos > 0 && pos < labels.len());
        let cubed: Vec<f64> = scores.iter().map(|s| s * s * s).collect();
        let auc = roc_auc(&scores, &labels).unwrap();
        let auc_t = roc_auc(&cubed, &labels).unwrap();
        prop_assert!((auc - auc_t).abs() < 1e-12);
        let ap = average_precision(&scores, &labels).unwrap();
        let ap_t = average_precision(&cubed, &labels).unwrap();
        prop_assert!((ap - ap_t).abs() < 1e-12);
    }

    #[test]
    fn composite_selects_per_pixel(
        bits in prop::collection::vec(any::<bool>(), 25),
        seed in any::<u64>(),
    ) {
        let mask = BinaryMask::new(5, 5, bits).unwrap();
        let a = common::natural_image(seed, 5, 5);
        let b = common::natural_image(seed.wrapping_add(1), 5, 5);
        let out = composite(&a, &b, &mask).unwrap();
        for y in 0..5 {
            for x in 0..5 {
                for c in 0..3 {
                    let expected = if mask.get(x, y) { b.get(x, y, c) } else { a.get(x, y, c) };
                    prop_assert_eq!(out.get(x, y, c), expected);
                }
            }
        }
    }

    #[test]
    fn convolution_preserves_interior_mean_on_periodic_images(
        seed in any::<u64>(),
        kernel_seed in any::<u64>(),
    ) {
        // On an image tiled with period 8, every 8-aligned window has the
        // same mean, so any unit-mass kernel must preserve the interior
        // window mean regardless of its symmetry.
        let tile = common::natural_image(seed, 8, 8);
        let w = 96;
        let mut data = Vec::with_capacity(w * w * 3);
        for y in 0..w {
            for x in 0..w {
                for c in 0..3 {
                    data.push(tile.get(x % 8, y % 8, c));
                }
            }
        }
        let img = Image::new(w, w, 3, data).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(kernel_seed);
        let spec = sample_blur_spec(&BlurConfig::default(), &mut rng).unwrap();
        let kernel = realize_kernel(&spec).unwrap();
        prop_assume!(kernel.size() / 2 <= 16);
        let out = convolve(&img, &kernel).unwrap();
        let window = 16..16 + 48; // six whole tile periods, inside the border margin
        let mut mean_in = 0.0;
        let mut mean_out = 0.0;
        for y in window.clone() {
            for x in window.clone() {
                for c in 0..3 {
                    mean_in += img.get(x, y, c);
                    mean_out += out.get(x, y, c);
                }
            }
        }
        let n = (48 * 48 * 3) as f64;
        prop_assert!(
            (mean_in / n - mean_out / n).abs() < 1e-6,
            "interior mean drifted by {}",
            (mean_in / n - mean_out / n).abs()
        );
    }

    #[test]
    fn realized_kernels_are_unit_mass(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spec = sample_blur_spec(&BlurConfig::default(), &mut rng).unwrap();
        let k = realize_kernel(&spec).unwrap();
        prop_assert!(k.size() % 2 == 1);
        prop_assert!(k.data().iter().all(|v| *v >= 0.0 && v.is_finite()));
        let mass: f64 = k.data().iter().sum();
        prop_assert!((mass - 1.0).abs() <= 1e-9);
    }
}
