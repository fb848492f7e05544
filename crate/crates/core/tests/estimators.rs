//! Monte-Carlo checks of the estimators and quantizers against closed forms.

mod common;

use rand::Rng;
use rayon::prelude::*;

use common::{ks_uniform, sq_dist};
use qrff::kernels::sup_error_scan;
use qrff::quantize::{sigma_delta_randomized, Alphabet, NoiseShapingConfig, Scheme};
use qrff::rng::{derive_seed, rng_from_seed};
use qrff::tasks::synth_toy_pairs;
use qrff::{msq, semiq_estimate, stocq, stocq_estimate, KernelSpec, Method, Pipeline, RffMap};

fn pair_at_sq_distance_five() -> (Vec<f64>, Vec<f64>) {
    (vec![0.3, -0.2], vec![0.3 + 2.0, -0.2 + 1.0])
}

#[test]
fn semiq_mean_over_maps_matches_kernel() {
    let (x, y) = pair_at_sq_distance_five();
    let spec = KernelSpec::rbf(0.2, 2).unwrap();
    let one = Alphabet::from_bits(1).unwrap();
    let estimates: Vec<f64> = (0..20u64)
        .into_par_iter()
        .map(|seed| {
            let map = RffMap::sample(spec, 100_000, seed).unwrap();
            semiq_estimate(&map.embed(&x).unwrap(), &msq(&map.embed(&y).unwrap(), &one)).unwrap()
        })
        .collect();
    let mean = estimates.iter().sum::<f64>() / 20.0;
    assert!((mean - (-1.0f64).exp()).abs() < 0.02, "{mean}");
}

#[test]
fn stocq_within_tolerance_on_every_seed() {
    let (x, y) = pair_at_sq_distance_five();
    let spec = KernelSpec::rbf(0.2, 2).unwrap();
    let one = Alphabet::from_bits(1).unwrap();
    for seed in 0..20u64 {
        let map = RffMap::sample(spec, 100_000, seed).unwrap();
        let mut rng = rng_from_seed(derive_seed(seed, &[1]));
        let qx = stocq(&map.embed(&x).unwrap(), &one, &mut rng);
        let qy = stocq(&map.embed(&y).unwrap(), &one, &mut rng);
        let k = stocq_estimate(&qx, &qy).unwrap();
        assert!((k - (-1.0f64).exp()).abs() < 0.03, "seed {seed}: {k}");
    }
}

#[test]
fn randomized_state_is_uniform_mid_sequence() {
    let mut rng = rng_from_seed(50);
    let z: Vec<f64> = (0..50).map(|_| rng.random_range(-1.0..=1.0)).collect();
    for (bits, c) in [(1u8, 1.0), (2, 1.0 / 3.0)] {
        let a = Alphabet::from_bits(bits).unwrap();
        let u25: Vec<f64> = (0..10_000u64)
            .map(|r| sigma_delta_randomized(&z, &a, &mut rng_from_seed(derive_seed(25, &[bits as u64, r]))).state[24])
            .collect();
        let (d, p) = ks_uniform(&u25, -c, c);
        assert!(p > 0.01, "b={bits}: D={d}, p={p}");
    }
}

fn beta_pipeline(m: usize, seed: u64) -> Pipeline {
    let config = NoiseShapingConfig::new(
        Scheme::Beta { beta: 1.1 },
        2,
        m / 2,
        Alphabet::from_bits(3).unwrap(),
    )
    .unwrap();
    let spec = KernelSpec::rbf(0.2, 50).unwrap();
    Pipeline::new(RffMap::sample(spec, m, seed).unwrap(), Method::NoiseShaping(config)).unwrap()
}

#[test]
fn toy_pair_at_zero_distance() {
    let mut rng = rng_from_seed(0);
    let x: Vec<f64> = (0..50).map(|_| rng.random_range(-2.0..2.0)).collect();
    for seed in 0..5 {
        let p = beta_pipeline(3000, seed);
        let mut rng = rng_from_seed(seed);
        let a = p.encode(&x, &mut rng).unwrap();
        let b = p.encode(&x, &mut rng).unwrap();
        let k = p.estimate(&a, &b).unwrap();
        assert!((k - 1.0).abs() < 0.05, "seed {seed}: {k}");
    }
}

#[test]
fn toy_scan_error_shrinks_with_m() {
    let grid = synth_toy_pairs(1000, 50, 7).unwrap();
    let maxima: Vec<f64> = [500, 1000, 3000]
        .iter()
        .map(|&m| {
            // Average over maps so a single lucky draw cannot reorder the sweep.
            (0..4u64)
                .map(|s| {
                    let r = sup_error_scan(&beta_pipeline(m, s), &grid, &mut rng_from_seed(s)).unwrap();
                    assert!(r.max_error.is_finite());
                    r.max_error
                })
                .sum::<f64>()
                / 4.0
        })
        .collect();
    assert!(maxima[0] > maxima[1] && maxima[1] > maxima[2], "{maxima:?}");
    assert!(maxima[2] < 0.1, "{maxima:?}");
}

#[test]
fn scan_errors_match_independent_kernel() {
    let grid = synth_toy_pairs(50, 50, 3).unwrap();
    let map = RffMap::sample(KernelSpec::rbf(0.2, 50).unwrap(), 64, 1).unwrap();
    let exact = Pipeline::new(map.clone(), Method::Exact).unwrap();
    assert_eq!(sup_error_scan(&exact, &grid, &mut rng_from_seed(0)).unwrap().max_error, 0.0);

    let rff = Pipeline::new(map.clone(), Method::Rff).unwrap();
    let r = sup_error_scan(&rff, &grid, &mut rng_from_seed(0)).unwrap();
    for ((x, y), e) in grid.iter().zip(&r.errors) {
        let (zx, zy) = (map.embed(x).unwrap(), map.embed(y).unwrap());
        let est = 2.0 / 64.0 * zx.iter().zip(&zy).map(|(a, b)| a * b).sum::<f64>();
        assert!((e - (est - (-0.2 * sq_dist(x, y)).exp()).abs()).abs() < 1e-12);
    }
}
