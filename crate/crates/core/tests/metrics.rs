use pdbench_core::image::Plane;
use pdbench_core::metrics::{dataset_rmse, mse_y, psnr, rmse_from_mses, ssim, ImagePair, MetricError};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_plane(rng: &mut ChaCha8Rng, w: usize, h: usize) -> Plane<f64> {
    Plane::from_fn(w, h, |_, _| rng.random_range(0.0..255.0)).unwrap()
}

/// SSIM evaluated window by window with an explicitly built 11×11 Gaussian.
fn ssim_oracle(a: &Plane<f64>, b: &Plane<f64>) -> f64 {
    let n = 11usize;
    let mut w = vec![0.0; n * n];
    for j in 0..n {
        for i in 0..n {
            let (dx, dy) = (i as f64 - 5.0, j as f64 - 5.0);
            w[j * n + i] = (-(dx * dx + dy * dy) / (2.0 * 1.5 * 1.5)).exp();
        }
    }
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= total);
    let c1 = (0.01f64 * 255.0).powi(2);
    let c2 = (0.03f64 * 255.0).powi(2);
    let mut sum = 0.0;
    let mut count = 0;
    for y0 in 0..=a.height() - n {
        for x0 in 0..=a.width() - n {
            let (mut ma, mut mb) = (0.0, 0.0);
            for j in 0..n {
                for i in 0..n {
                    ma += w[j * n + i] * a.get(x0 + i, y0 + j);
                    mb += w[j * n + i] * b.get(x0 + i, y0 + j);
                }
            }
            let (mut va, mut vb, mut cov) = (0.0, 0.0, 0.0);
            for j in 0..n {
                for i in 0..n {
                    let da = a.get(x0 + i, y0 + j) - ma;
                    let db = b.get(x0 + i, y0 + j) - mb;
                    va += w[j * n + i] * da * da;
                    vb += w[j * n + i] * db * db;
                    cov += w[j * n + i] * da * db;
                }
            }
            sum += (2.0 * ma * mb + c1) * (2.0 * cov + c2) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
            count += 1;
        }
    }
    sum / count as f64
}

#[test]
fn ssim_matches_window_oracle_on_random_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(2018);
    for _ in 0..20 {
        let a = random_plane(&mut rng, 32, 32);
        // Correlated estimate so values span a useful range.
        let mix: f64 = rng.random_range(0.0..1.0);
        let noise = random_plane(&mut rng, 32, 32);
        let b = a.zip_map(&noise, |x, n| mix * x + (1.0 - mix) * n);
        let got = ssim(&ImagePair::new(a.clone(), b.clone()).unwrap()).unwrap();
        let want = ssim_oracle(&a, &b);
        assert!((got - want).abs() < 1e-9, "{got} vs {want}");
        let swapped = ssim(&ImagePair::new(b, a.clone()).unwrap()).unwrap();
        assert!((got - swapped).abs() < 1e-12);
        let same = ssim(&ImagePair::new(a.clone(), a).unwrap()).unwrap();
        assert!((same - 1.0).abs() < 1e-12);
    }
}

#[test]
fn ssim_constant_planes_closed_form() {
    let a = Plane::<f64>::filled(20, 20, 100.0).unwrap();
    let b = Plane::<f64>::filled(20, 20, 130.0).unwrap();
    let c1 = (0.01f64 * 255.0).powi(2);
    let want = (2.0 * 100.0 * 130.0 + c1) / (100.0f64.powi(2) + 130.0f64.powi(2) + c1);
    assert!((ssim(&ImagePair::new(a, b).unwrap()).unwrap() - want).abs() < 1e-12);
    let small = Plane::<f64>::filled(10, 30, 1.0).unwrap();
    assert!(matches!(
        ssim(&ImagePair::new(small.clone(), small).unwrap()),
        Err(MetricError::TooSmallForWindow { .. })
    ));
}

#[test]
fn dataset_rmse_is_root_of_mean_mse_not_mean_rmse() {
    let small = ImagePair::new(Plane::<f64>::filled(2, 2, 10.0).unwrap(), Plane::filled(2, 2, 13.0).unwrap()).unwrap();
    let large = ImagePair::new(Plane::<f64>::filled(10, 10, 50.0).unwrap(), Plane::filled(10, 10, 54.0).unwrap()).unwrap();
    assert_eq!(mse_y(&small), 9.0);
    assert_eq!(mse_y(&large), 16.0);
    let got = dataset_rmse(&[small.clone(), large.clone()]).unwrap();
    assert!((got - 3.535_533_905_932_737_6).abs() < 1e-9);
    let mean_of_rmses = (mse_y(&small).sqrt() + mse_y(&large).sqrt()) / 2.0;
    assert_eq!(mean_of_rmses, 3.5);
    assert!((got - mean_of_rmses).abs() > 0.03);
    assert!(matches!(dataset_rmse::<f64>(&[]), Err(MetricError::EmptySet)));
}

#[test]
fn psnr_values() {
    let a = Plane::<f64>::filled(4, 4, 0.0).unwrap();
    assert_eq!(psnr(&ImagePair::new(a.clone(), a.clone()).unwrap()), f64::INFINITY);
    let full = Plane::<f64>::filled(4, 4, 255.0).unwrap();
    assert_eq!(psnr(&ImagePair::new(a.clone(), full).unwrap()), 0.0);
    let five = Plane::<f64>::filled(4, 4, 5.0).unwrap();
    let want = 10.0 * (2601.0f64).log10();
    assert!((psnr(&ImagePair::new(a, five).unwrap()) - want).abs() < 1e-12);
}

#[test]
fn single_precision_agrees() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let a = random_plane(&mut rng, 24, 24);
    let b = random_plane(&mut rng, 24, 24);
    let d = ssim(&ImagePair::new(a.clone(), b.clone()).unwrap()).unwrap();
    let s = ssim(&ImagePair::new(a.cast::<f32>(), b.cast::<f32>()).unwrap()).unwrap();
    assert!((d - s as f64).abs() < 1e-3);
}

proptest! {
    #[test]
    fn rmse_ignores_order_and_singletons_are_roots(mses in prop::collection::vec(0.0..1000.0f64, 1..12), seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        let mut shuffled = mses.clone();
        shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let a = rmse_from_mses(&mses).unwrap();
        let b = rmse_from_mses(&shuffled).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * a.max(1.0));
        prop_assert_eq!(rmse_from_mses(&mses[..1]).unwrap(), mses[0].sqrt());
    }

    #[test]
    fn constant_shift_gives_squared_mse(c in -50.0..50.0f64, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_plane(&mut rng, 7, 5);
        let b = a.map(|v| v + c);
        let m = mse_y(&ImagePair::new(a, b).unwrap());
        prop_assert!((m - c * c).abs() < 1e-9 * (1.0 + c * c));
    }
}
