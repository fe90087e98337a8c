//! PSNR, SSIM and difference-map oracles.

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thermsr_core::metrics::{difference_maps, evaluate_pair, psnr_all, ssim, SsimParams, PSNR_IDENTICAL_DB};
use thermsr_core::FeatureMap;
use thermsr_oracles as oracle;

fn img(m: &FeatureMap<f64>) -> oracle::Img {
    let (h, w, c) = m.shape();
    oracle::Img { h, w, c, data: m.data().to_vec() }
}

fn random(rng: &mut ChaCha8Rng, h: usize, w: usize, c: usize) -> FeatureMap<f64> {
    FeatureMap::from_fn(h, w, c, |_, _, _| rng.gen())
}

#[test]
fn psnr_closed_forms() {
    let a = FeatureMap::<f64>::from_fn(8, 8, 3, |y, x, c| ((y * 31 + x * 7 + c) % 200) as f64);
    let b = a.map(|v| v + 1.0);
    assert!((psnr_all(&a, &b, 255.0).unwrap() - 48.1308).abs() < 1e-3);
    let zero = FeatureMap::<f64>::zeros(8, 8, 3);
    let full = FeatureMap::<f64>::filled(8, 8, 3, 255.0);
    assert_eq!(psnr_all(&zero, &full, 255.0).unwrap(), 0.0);
    assert_eq!(psnr_all(&a, &a, 255.0).unwrap(), PSNR_IDENTICAL_DB);
    assert!(psnr_all(&a, &b, 0.0).is_err());
    assert!(psnr_all(&a, &FeatureMap::zeros(8, 7, 3), 1.0).is_err());
}

#[test]
fn ssim_matches_brute_force_on_twenty_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    for _ in 0..20 {
        let (h, w, c) = (rng.gen_range(11..24), rng.gen_range(11..24), rng.gen_range(1..4));
        let a = random(&mut rng, h, w, c);
        let noise = rng.gen_range(0.0..0.5);
        let jitter = random(&mut rng, h, w, c);
        let b = FeatureMap::from_fn(h, w, c, |y, x, k| (a.get(y, x, k) + noise * (jitter.get(y, x, k) - 0.5)).clamp(0.0, 1.0));
        let got = ssim(&a, &b, &SsimParams::default()).unwrap();
        assert!((got - oracle::ssim(&img(&a), &img(&b), 1.0)).abs() < 1e-4, "{got}");
    }
}

#[test]
fn ssim_examples() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let a = random(&mut rng, 24, 24, 3);
    assert!((ssim(&a, &a, &SsimParams::default()).unwrap() - 1.0).abs() < 1e-9);
    let inv = a.map(|v| 1.0 - v);
    assert!(ssim(&a, &inv, &SsimParams::default()).unwrap() < 0.0);
    assert!(ssim(&FeatureMap::<f64>::zeros(8, 8, 1), &FeatureMap::zeros(8, 8, 1), &SsimParams::default()).is_err());
}

#[test]
fn difference_map_examples() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let a = random(&mut rng, 16, 16, 3);
    let d = difference_maps(&a, &a).unwrap();
    assert_eq!((d.temp_mae, d.grad_mae), (0.0, 0.0));
    assert!(d.temp_map.data().iter().chain(d.grad_map.data()).all(|&v| v == 0.0));
    let shifted = a.map(|v| v + 0.1);
    let d = difference_maps(&shifted, &a).unwrap();
    assert!((d.temp_mae - 0.1).abs() < 1e-12);
    assert!(d.grad_mae < 1e-12);
    let r = evaluate_pair(&shifted, &a, 1.0, true).unwrap();
    assert!(r.maps.is_some() && r.psnr > 19.9 && r.psnr < 20.1);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn psnr_and_ssim_properties(seed in any::<u64>(), k in 1.0f64..50.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random(&mut rng, 12, 12, 3);
        let b = random(&mut rng, 12, 12, 3);
        let p = psnr_all(&a, &b, 1.0).unwrap();
        prop_assert!((p - oracle::psnr(&img(&a), &img(&b), 1.0)).abs() < 1e-9);
        prop_assert_eq!(p, psnr_all(&b, &a, 1.0).unwrap());
        let (ka, kb) = (a.map(|v| v * k), b.map(|v| v * k));
        prop_assert!((psnr_all(&ka, &kb, k).unwrap() - p).abs() < 1e-9);
        // halving every error quarters the MSE
        let closer = FeatureMap::from_fn(12, 12, 3, |y, x, c| 0.5 * (a.get(y, x, c) + b.get(y, x, c)));
        prop_assert!(psnr_all(&a, &closer, 1.0).unwrap() > p);
        let s = SsimParams::default();
        prop_assert!((ssim(&a, &b, &s).unwrap() - ssim(&b, &a, &s).unwrap()).abs() < 1e-9);
        let d = difference_maps(&a, &b).unwrap();
        prop_assert!(d.temp_map.data().iter().chain(d.grad_map.data()).all(|&v| v >= 0.0));
    }
}
