// SPDX-License-Identifier: Apache-2.0

use super::{add_gaussian_noise, clip_in_place, BudgetSpent, ClipConfig, MeanEstimate, NoiseMode};
use crate::error::{invalid, Error, Result};
use crate::privacy::{clipped_mean_sensitivity, gaussian_noise_scale, CdpBudget};
use ndarray::{Array1, ArrayView2, Axis};
use rand::Rng;

/// Mean of the rows of `samples` after clipping each to `radius`; the
/// pre-noise statistic of [`simple_clip_mean`].
pub fn clipped_mean(samples: ArrayView2<f64>, radius: f64) -> Result<Array1<f64>> {
    let n = samples.nrows();
    if n == 0 {
        return Err(invalid("cannot estimate a mean from zero samples"));
    }
    let mut sum = Array1::<f64>::zeros(samples.ncols());
    let mut row = Array1::<f64>::zeros(samples.ncols());
    for x in samples.axis_iter(Axis(0)) {
        row.assign(&x);
        clip_in_place(row.view_mut(), radius);
        sum += &row;
    }
    Ok(sum / n as f64)
}

/// Clip every sample to R, average, and add N(0, 2R²/(ρn²)) noise per
/// coordinate. The result is ρ-zCDP.
pub fn simple_clip_mean<R: Rng + ?Sized>(
    samples: ArrayView2<f64>,
    cfg: &ClipConfig,
    budget: CdpBudget,
    noise: NoiseMode,
    rng: &mut R,
) -> Result<MeanEstimate> {
    let mut value = clipped_mean(samples, cfg.radius())?;
    let budget_spent = match noise {
        NoiseMode::Private => {
            let sens = clipped_mean_sensitivity(cfg.radius(), samples.nrows())?;
            let scale = gaussian_noise_scale(sens, budget)?;
            add_gaussian_noise(&mut value, scale.sigma(), rng);
            BudgetSpent::Cdp(budget)
        }
        NoiseMode::Disabled => BudgetSpent::NonPrivate,
    };
    Ok(MeanEstimate {
        value,
        iterate_trace: Vec::new(),
        budget_spent,
    })
}

/// Upper bound d^{p/2} M^p R^{1−p} / (p − 1) on the clipping bias
/// ‖E[Clip(X, R)] − E[X]‖ for directional p-th moments bounded by M^p.
pub fn clipping_bias_bound(p: f64, moment_bound: f64, d: usize, radius: f64) -> Result<f64> {
    if !(p >= 2.0) {
        return Err(Error::OutOfRegime {
            what: format!("moment order p = {p}"),
            bound: "p >= 2".into(),
        });
    }
    if !(radius > 0.0) || !(moment_bound > 0.0) || d == 0 {
        return Err(invalid("radius, moment bound and dimension must be positive"));
    }
    Ok((d as f64).powf(p / 2.0) * moment_bound.powf(p) * radius.powf(1.0 - p) / (p - 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use ndarray::{array, Array2};

    #[test]
    fn identical_samples_noise_disabled() {
        let v = array![0.3, -0.4, 0.2];
        let samples = Array2::from_shape_fn((17, 3), |(_, j)| v[j]);
        let est = simple_clip_mean(
            samples.view(),
            &ClipConfig::new(1.0).unwrap(),
            CdpBudget::new(1.0).unwrap(),
            NoiseMode::Disabled,
            &mut stream(0),
        )
        .unwrap();
        for (a, b) in est.value.iter().zip(v.iter()) {
            assert!((a - b).abs() < 1e-15);
        }
        assert_eq!(est.budget_spent, BudgetSpent::NonPrivate);
        assert!(est.iterate_trace.is_empty());
    }

    #[test]
    fn symmetric_pair_cancels() {
        let samples = array![[3.0, 4.0], [-3.0, -4.0]];
        let est = simple_clip_mean(
            samples.view(),
            &ClipConfig::new(1.0).unwrap(),
            CdpBudget::new(1.0).unwrap(),
            NoiseMode::Disabled,
            &mut stream(0),
        )
        .unwrap();
        assert_eq!(est.value, array![0.0, 0.0]);
    }

    #[test]
    fn empty_input_rejected() {
        let samples = Array2::<f64>::zeros((0, 2));
        let r = simple_clip_mean(
            samples.view(),
            &ClipConfig::new(1.0).unwrap(),
            CdpBudget::new(1.0).unwrap(),
            NoiseMode::Private,
            &mut stream(0),
        );
        assert!(r.is_err());
    }

    #[test]
    fn private_noise_has_calibrated_variance() {
        // All-zero samples isolate the noise; its empirical variance should
        // match 2R²/(ρn²).
        let samples = Array2::<f64>::zeros((50, 4));
        let cfg = ClipConfig::new(2.0).unwrap();
        let rho = CdpBudget::new(0.5).unwrap();
        let mut rng = stream(11);
        let mut acc = 0.0;
        let reps = 5000;
        for _ in 0..reps {
            let est = simple_clip_mean(samples.view(), &cfg, rho, NoiseMode::Private, &mut rng)
                .unwrap();
            acc += est.value.dot(&est.value);
        }
        let var = acc / (reps * 4) as f64;
        let want = 2.0 * 4.0 / (0.5 * 2500.0);
        assert!((var / want - 1.0).abs() < 0.05, "var {var} want {want}");
    }

    #[test]
    fn bias_bound_examples() {
        assert!((clipping_bias_bound(2.0, 1.0, 1, 10.0).unwrap() - 0.1).abs() < 1e-15);
        assert!(clipping_bias_bound(1.5, 1.0, 1, 10.0).is_err());
        let far = clipping_bias_bound(3.0, 1.0, 4, 1e8).unwrap();
        assert!(far < 1e-14);
        // Decreasing in p once R exceeds √d·M.
        let (d, m, r) = (4usize, 1.0, 2.5);
        let mut prev = f64::INFINITY;
        for i in 0..40 {
            let p = 2.0 + 0.1 * f64::from(i);
            let b = clipping_bias_bound(p, m, d, r).unwrap();
            assert!(b < prev);
            prev = b;
        }
    }
}
