// SPDX-License-Identifier: Apache-2.0

use super::HeavyTailSpec;
use crate::error::{invalid, Result};
use crate::optimizer::{KnownTruth, ProblemInstance, Projection};
use ndarray::Array1;
use rand::Rng;
use rand_distr::StandardNormal;
use std::sync::Arc;

/// Quadratic problem l(w, Z) = (λ/2)‖w − w̄‖² − ⟨Z − μ, w⟩ with Z drawn from
/// `spec`, on the ball of diameter L about the origin.
///
/// w̄ is drawn uniformly from the ball of radius L/4, so it is the interior
/// minimizer of F(w) = (λ/2)‖w − w̄‖². The gradient moment bound is
/// M + λL, since ‖λ(w − w̄)‖ ≤ λL on the feasible set.
pub fn make_quadratic_problem<R: Rng + ?Sized>(
    spec: &HeavyTailSpec,
    diameter: f64,
    curvature: f64,
    rng: &mut R,
) -> Result<ProblemInstance> {
    if !(diameter.is_finite() && diameter > 0.0) {
        return Err(invalid(format!("diameter must be positive, got {diameter}")));
    }
    if !(curvature.is_finite() && curvature > 0.0) {
        return Err(invalid(format!("curvature must be positive, got {curvature}")));
    }
    let d = spec.dimension();
    let mut dir: Array1<f64> = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    let norm = dir.dot(&dir).sqrt();
    if norm > 0.0 {
        dir /= norm;
    }
    let u: f64 = rng.random();
    let w_bar = dir * (0.25 * diameter * u.powf(1.0 / d as f64));
    let projection = Projection::ball(Array1::zeros(d), diameter / 2.0)?;
    if projection.apply(w_bar.view()) != w_bar {
        return Err(invalid("minimizer lies outside the feasible set"));
    }

    let mu = spec.mean().clone();
    let (wb1, wb2, wb3) = (w_bar.clone(), w_bar.clone(), w_bar.clone());
    let lambda = curvature;
    let problem = ProblemInstance::new(
        d,
        Arc::new(move |w, z, mut out| {
            for j in 0..out.len() {
                out[j] = lambda * (w[j] - wb1[j]) - (z[j] - mu[j]);
            }
        }),
        projection,
        diameter,
        curvature,
        spec.moment_bound() + curvature * diameter,
        spec.moment_order(),
    )?;
    Ok(problem.with_truth(KnownTruth {
        minimizer: w_bar,
        min_value: 0.0,
        objective: Arc::new(move |w| {
            let e = &w - &wb2;
            0.5 * lambda * e.dot(&e)
        }),
        gradient: Arc::new(move |w| (&w - &wb3) * lambda),
    }))
}
