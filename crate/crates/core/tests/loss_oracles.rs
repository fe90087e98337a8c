//! Consistency-loss oracles: histograms, 1-D Wasserstein distance, region
//! masks and the combined objective.

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thermsr_core::loss::{
    bin_index, boundary_loss, extract_region_masks, l1_loss, region_histogram, region_loss, total_loss,
    wasserstein_1d, Histogram, LossWeights, MaskParams, RegionMasks,
};
use thermsr_core::FeatureMap;
use thermsr_oracles as oracle;

fn random_histogram(rng: &mut ChaCha8Rng, bins: usize) -> Histogram {
    let sparse = rng.gen_bool(0.3);
    let mut v: Vec<f64> = (0..bins).map(|_| if sparse && rng.gen_bool(0.8) { 0.0 } else { rng.gen::<f64>() }).collect();
    if v.iter().all(|&x| x == 0.0) {
        v[rng.gen_range(0..bins)] = 1.0;
    }
    let s: f64 = v.iter().sum();
    Histogram { bins: v.into_iter().map(|x| x / s).collect() }
}

#[test]
fn wasserstein_equals_brute_force_on_ten_thousand_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for _ in 0..10_000 {
        let bins = [8, 16, 64, 256][rng.gen_range(0..4)];
        let (a, b) = (random_histogram(&mut rng, bins), random_histogram(&mut rng, bins));
        let w = wasserstein_1d(&a, &b).unwrap();
        assert_eq!(w, oracle::wasserstein_cdf(&a.bins, &b.bins));
        assert!((w - oracle::wasserstein_transport(&a.bins, &b.bins)).abs() < 1e-9);
    }
}

#[test]
fn wasserstein_is_a_metric_on_random_triples() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..10_000 {
        let bins = [8, 32][rng.gen_range(0..2)];
        let [a, b, c] = [0; 3].map(|_| random_histogram(&mut rng, bins));
        let ab = wasserstein_1d(&a, &b).unwrap();
        assert_eq!(ab, wasserstein_1d(&b, &a).unwrap());
        assert!(ab <= wasserstein_1d(&a, &c).unwrap() + wasserstein_1d(&c, &b).unwrap() + 1e-12);
        assert_eq!(wasserstein_1d(&a, &a).unwrap(), 0.0);
    }
}

#[test]
fn wasserstein_examples() {
    let delta = |k: usize| Histogram { bins: (0..8).map(|i| if i == k { 1.0 } else { 0.0 }).collect() };
    assert_eq!(wasserstein_1d(&delta(2), &delta(5)).unwrap(), 3.0);
    assert!(wasserstein_1d(&delta(2), &Histogram { bins: vec![0.25; 4] }).is_err());
}

#[test]
fn histogram_examples() {
    let img = FeatureMap::<f64>::filled(4, 4, 3, 0.5);
    let h = region_histogram(&img, &[true; 16], 256).unwrap();
    assert_eq!(h.bins[128], 1.0);
    assert_eq!(bin_index(1.0, 256), 255);
    assert_eq!(bin_index(0.0, 256), 0);
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let vals: Vec<f64> = (0..999).map(|_| rng.gen()).collect();
    let h = Histogram::from_values(vals, 256).unwrap();
    assert!((h.bins.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    assert!(Histogram::from_values(Vec::<f64>::new(), 256).is_err());
}

fn one_region(h: usize, w: usize) -> RegionMasks {
    RegionMasks::new(h, w, vec![1; h * w], vec![false; h * w], "one").unwrap()
}

#[test]
fn region_loss_examples() {
    let hr = FeatureMap::<f64>::filled(8, 8, 3, 0.5 + 3.0 / 256.0);
    let sr = FeatureMap::<f64>::filled(8, 8, 3, 0.5);
    let m = one_region(8, 8);
    assert_eq!(region_loss(&sr, &hr, &m, 256).unwrap(), (3.0, false));
    assert_eq!(region_loss(&hr, &hr, &m, 256).unwrap(), (0.0, false));
    let (l, none) = region_loss(&sr, &hr, &RegionMasks::empty(8, 8), 256).unwrap();
    assert_eq!((l, none), (0.0, true));
}

#[test]
fn boundary_loss_examples() {
    let hr = FeatureMap::<f64>::from_fn(6, 6, 1, |_, x, _| if x >= 3 { 0.8 } else { 0.0 });
    let flat = FeatureMap::<f64>::zeros(6, 6, 1);
    let on_step: Vec<bool> = (0..36).map(|p| p % 6 == 2).collect();
    let m = RegionMasks::new(6, 6, vec![1; 36], on_step, "step").unwrap();
    assert!((boundary_loss(&flat, &hr, &m).unwrap() - 0.8).abs() < 1e-12);
    assert_eq!(boundary_loss(&hr, &hr, &m).unwrap(), 0.0);
    assert_eq!(boundary_loss(&flat, &hr, &one_region(6, 6)).unwrap(), 0.0);
}

#[test]
fn total_loss_examples() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let a = FeatureMap::<f64>::from_fn(16, 16, 3, |_, _, _| rng.gen());
    let b = a.map(|v| (v * 0.9 + 0.03).min(1.0));
    let m = extract_region_masks(&a, MaskParams { bands: 4, min_area: 8 }).unwrap();
    let same = total_loss(&a, &a, &m, &LossWeights::default()).unwrap();
    assert_eq!((same.total, same.rec, same.region, same.boundary), (0.0, 0.0, 0.0, 0.0));
    let zero = total_loss(&a, &b, &m, &LossWeights { lambda: 0.0, ..Default::default() }).unwrap();
    assert_eq!(zero.total, l1_loss(&a, &b).unwrap());
    assert_eq!(LossWeights::default().lambda, 0.03);
    assert!(LossWeights { lambda: 1.5, ..Default::default() }.validate().is_err());
}

#[test]
fn two_halves_give_two_regions_and_a_four_pixel_seam() {
    let img = FeatureMap::<f64>::from_fn(16, 16, 3, |_, x, _| if x < 8 { 0.2 } else { 0.8 });
    let m = extract_region_masks(&img, MaskParams::default()).unwrap();
    assert_eq!(m.region_count(), 2);
    for (p, &b) in m.boundary().iter().enumerate() {
        assert_eq!(b, (6..10).contains(&(p % 16)), "pixel {p}");
    }
}

#[test]
fn constant_image_is_one_region_without_boundary() {
    let m = extract_region_masks(&FeatureMap::<f64>::filled(12, 9, 3, 0.4), MaskParams::default()).unwrap();
    assert_eq!(m.region_count(), 1);
    assert_eq!(m.boundary_count(), 0);
}

#[test]
fn checkerboard_regions_are_merged_to_min_area() {
    let img = FeatureMap::<f64>::from_fn(20, 20, 3, |y, x, _| if (y + x) % 2 == 0 { 0.1 } else { 0.9 });
    let m = extract_region_masks(&img, MaskParams { bands: 8, min_area: 32 }).unwrap();
    assert!(m.region_pixels().iter().all(|r| r.len() >= 32));
    assert!(m.labels().iter().all(|&l| l > 0));
}

#[test]
fn blocky_images_match_brute_force_labelling() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for _ in 0..50 {
        // 8x8 blocks so every component is at least 64 pixels
        let vals: Vec<f64> = (0..16).map(|_| rng.gen()).collect();
        let img = FeatureMap::<f64>::from_fn(32, 32, 3, |y, x, _| vals[(y / 8) * 4 + x / 8]);
        let m = extract_region_masks(&img, MaskParams { bands: 8, min_area: 32 }).unwrap();
        let class: Vec<usize> = (0..1024).map(|p| bin_index(vals[(p / 32 / 8) * 4 + (p % 32) / 8], 8)).collect();
        assert!(oracle::same_partition(m.labels(), &oracle::components(&class, 32, 32)));
    }
}

fn blob_image(seed: u64, h: usize, w: usize) -> FeatureMap<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centres: Vec<(f64, f64, f64)> = (0..5).map(|_| (rng.gen_range(0.0..h as f64), rng.gen_range(0.0..w as f64), rng.gen())).collect();
    FeatureMap::from_fn(h, w, 3, |y, x, _| {
        let mut best = (f64::INFINITY, 0.0);
        for &(cy, cx, v) in &centres {
            let d = (y as f64 - cy).powi(2) + (x as f64 - cx).powi(2);
            if d < best.0 {
                best = (d, v);
            }
        }
        (best.1 + rng.gen_range(-0.05..0.05f64)).clamp(0.0, 1.0)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn masks_partition_the_image(seed in any::<u64>(), h in 12usize..40, w in 12usize..40) {
        let m = extract_region_masks(&blob_image(seed, h, w), MaskParams::default()).unwrap();
        prop_assert!(m.labels().iter().all(|&l| l >= 1 && (l as usize) <= m.region_count()));
        prop_assert!(m.region_pixels().iter().all(|r| r.len() >= 32.min(h * w)));
        // seeds touch two labels; the one-pixel dilation keeps them within 5x5
        let l = m.labels();
        for (p, _) in m.boundary().iter().enumerate().filter(|(_, &b)| b) {
            let (y, x) = (p / w, p % w);
            let mut seen = std::collections::HashSet::new();
            for yy in y.saturating_sub(2)..(y + 3).min(h) {
                for xx in x.saturating_sub(2)..(x + 3).min(w) {
                    seen.insert(l[yy * w + xx]);
                }
            }
            prop_assert!(seen.len() >= 2);
        }
    }

    #[test]
    fn loss_components_are_nonnegative_and_vanish_only_on_equality(seed in any::<u64>(), lambda in 0.0f64..1.0) {
        let a = blob_image(seed, 16, 16);
        let b = blob_image(seed ^ 1, 16, 16);
        let m = extract_region_masks(&b, MaskParams { bands: 4, min_area: 8 }).unwrap();
        let l = total_loss(&a, &b, &m, &LossWeights { lambda, ..Default::default() }).unwrap();
        prop_assert!(l.total >= 0.0 && l.rec >= 0.0 && l.region >= 0.0 && l.boundary >= 0.0);
        prop_assert!((l.total > 0.0) == (a != b));
    }

    #[test]
    fn region_loss_ignores_permutations_within_regions(seed in any::<u64>()) {
        let hr = blob_image(seed, 16, 16);
        let sr = blob_image(seed ^ 7, 16, 16);
        let m = extract_region_masks(&hr, MaskParams { bands: 4, min_area: 8 }).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut shuffled = sr.clone();
        for px in m.region_pixels() {
            let mut order = px.clone();
            for i in (1..order.len()).rev() {
                order.swap(i, rng.gen_range(0..=i));
            }
            for (&dst, &src) in px.iter().zip(&order) {
                for c in 0..3 {
                    shuffled.set(dst / 16, dst % 16, c, sr.get(src / 16, src % 16, c));
                }
            }
        }
        prop_assert_eq!(region_loss(&sr, &hr, &m, 256).unwrap(), region_loss(&shuffled, &hr, &m, 256).unwrap());
    }

    #[test]
    fn boundary_loss_ignores_a_global_offset(seed in any::<u64>(), k in -64i32..64) {
        let hr = blob_image(seed, 16, 16);
        let sr = blob_image(seed ^ 3, 16, 16);
        let m = extract_region_masks(&hr, MaskParams { bands: 4, min_area: 8 }).unwrap();
        let shift = k as f64 / 256.0;
        let moved = sr.map(|v| v + shift);
        let (a, b) = (boundary_loss(&sr, &hr, &m).unwrap(), boundary_loss(&moved, &hr, &m).unwrap());
        prop_assert!((a - b).abs() < 1e-12);
    }
}
