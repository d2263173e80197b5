// SPDX-License-Identifier: Apache-2.0

use heavydp::estimators::{clip, group_averages};
use heavydp::privacy::{shuffle_amplified_group_budget, simple_clipping_total_rho};
use heavydp::rng::{derive_seed, stream};
use heavydp::stats::median;
use heavydp::{
    clipping_bias_bound, iterative_update_mean, simple_clip_mean, ApproxDpBudget, CdpBudget,
    ClipConfig, Family, HeavyTailSpec, IterativeConfig, NoiseMode, RemainderPolicy,
};
use ndarray::{array, Array1, Array2, Axis};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

fn norm(v: &Array1<f64>) -> f64 {
    v.dot(v).sqrt()
}

#[test]
fn simple_mean_of_gaussian_data_is_accurate() {
    let errors: Vec<f64> = (0..100u64)
        .into_par_iter()
        .map(|seed| {
            let mut rng = stream(derive_seed(1, "simple-gaussian", seed));
            let x = Array2::from_shape_fn((10_000, 5), |_| rng.sample::<f64, _>(StandardNormal));
            let est = simple_clip_mean(
                x.view(),
                &ClipConfig::new(20.0).unwrap(),
                CdpBudget::new(10.0).unwrap(),
                NoiseMode::Private,
                &mut rng,
            )
            .unwrap();
            norm(&est.value)
        })
        .collect();
    assert!(median(&errors) < 0.05, "median error {}", median(&errors));
}

#[test]
fn clipping_bias_is_within_bound() {
    let p = 2.0;
    let mu = array![1.5, -1.0, 0.5];
    let spec = HeavyTailSpec::new(3, p, 1.0, Family::student_like(p), mu.clone()).unwrap();
    for radius in [1.0, 2.0, 4.0] {
        let n = 1_000_000;
        let x = spec.sample(n, &mut stream(derive_seed(2, "clip-bias", radius as u64)));
        let clipped = Array2::from_shape_fn((n, 3), |(i, j)| clip(x.row(i), radius)[j]);
        let mean = clipped.mean_axis(Axis(0)).unwrap();
        // Each clipped coordinate has variance at most R², so the norm of the
        // mean has standard error at most R·√(d/n).
        let se = radius * (3.0 / n as f64).sqrt();
        let bias = norm(&(&mean - &mu));
        let bound = clipping_bias_bound(p, 1.0, 3, radius).unwrap();
        assert!(bias <= bound + 3.0 * se, "R = {radius}: bias {bias} > bound {bound}");
    }
}

#[test]
fn group_mean_variance_matches_sampling_plus_noise() {
    let (n, k, d, radius, rho) = (8000usize, 800usize, 5usize, 50.0, 500.0);
    let m = n / k;
    let spec = HeavyTailSpec::centered(d, 2.0, 1.0, Family::student_like(2.0)).unwrap();
    let mut values = Vec::new();
    for seed in 0..40u64 {
        let mut rng = stream(derive_seed(3, "group-variance", seed));
        let x = spec.sample(n, &mut rng);
        let stats = group_averages(
            x.view(),
            k,
            &ClipConfig::new(radius).unwrap(),
            CdpBudget::new(rho).unwrap(),
            RemainderPolicy::Reject,
            NoiseMode::Private,
            &mut rng,
        )
        .unwrap();
        values.extend(stats.group_means().iter().copied());
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (values.len() - 1) as f64;
    let sigma2 = 2.0 * radius * radius / (rho * (m * m) as f64);
    let expected = 1.0 / m as f64 + sigma2;
    assert!((var - expected).abs() < 0.2 * expected, "variance {var}, expected {expected}");
}

/// The grouped estimator is meant to beat simple clipping in median error at
/// n = 32000, k = 800, ε = 0.5. With the shuffle-amplified per-group budget
/// the noise on each group mean has standard deviation about 5.5·R per
/// coordinate, so at this n the iterative estimator's median error is two to
/// three orders of magnitude larger. Kept as a record of the expectation.
#[test]
#[ignore = "does not hold at this sample size; see the doc comment"]
fn iterative_median_beats_simple_clipping() {
    let (d, p, n, k) = (5usize, 2.0, 32_000usize, 800usize);
    let total = ApproxDpBudget::new(0.5, 1e-5).unwrap();
    let spec = HeavyTailSpec::centered(d, p, 1.0, Family::student_like(p)).unwrap();
    let radius = (d as f64).sqrt() * (n as f64 * 0.5 / (d as f64).sqrt()).powf(1.0 / p);
    let rho = simple_clipping_total_rho(0.5, 1e-5).unwrap();
    let pairs: Vec<(f64, f64)> = (0..200u64)
        .into_par_iter()
        .map(|seed| {
            let mut rng = stream(derive_seed(4, "median-comparison", seed));
            let x = spec.sample(n, &mut rng);
            let cfg = ClipConfig::new(radius).unwrap();
            let s = simple_clip_mean(x.view(), &cfg, rho, NoiseMode::Private, &mut rng).unwrap();
            let it = iterative_update_mean(
                x.view(),
                &cfg,
                total,
                &IterativeConfig::new(k, 40),
                NoiseMode::Private,
                &mut rng,
            )
            .unwrap();
            (norm(&s.value), norm(&it.value))
        })
        .collect();
    let simple: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let iter: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    assert!(median(&iter) < median(&simple));
}

#[test]
fn group_noise_scale_at_benchmark_size() {
    // Documents the magnitude quoted above.
    let total = ApproxDpBudget::new(0.5, 1e-5).unwrap();
    let rho = shuffle_amplified_group_budget(total, 800).unwrap().rho();
    let m = 40.0;
    let sigma_over_r = (2.0 / (rho * m * m)).sqrt();
    assert!((5.0..6.0).contains(&sigma_over_r), "{sigma_over_r}");
}

#[test]
fn noiseless_iterative_estimate_is_close_on_light_tails() {
    let spec = HeavyTailSpec::new(3, 2.0, 1.0, Family::Gaussian, array![2.0, -1.0, 0.5]).unwrap();
    let mut rng = stream(5);
    let x = spec.sample(20_000, &mut rng);
    let est = iterative_update_mean(
        x.view(),
        &ClipConfig::new(10.0).unwrap(),
        ApproxDpBudget::new(0.5, 1e-5).unwrap(),
        &IterativeConfig::new(100, 40),
        NoiseMode::Disabled,
        &mut rng,
    )
    .unwrap();
    // Group means have sd 1/√200 per coordinate.
    assert!(norm(&(&est.value - spec.mean())) < 0.1);
}
