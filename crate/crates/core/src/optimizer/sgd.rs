// SPDX-License-Identifier: Apache-2.0

use super::{ProblemInstance, Schedule, StepBudget};
use crate::error::{invalid, Error, Result};
use crate::estimators::{
    add_gaussian_noise, iterative_update_mean, simple_clip_mean, ClipConfig, IterativeConfig,
    NoiseMode,
};
use crate::privacy::{ApproxDpBudget, CdpBudget};
use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;

/// How each step turns per-sample gradients into a gradient estimate.
#[derive(Debug, Clone, PartialEq)]
pub enum GradientEstimator {
    SimpleClipping {
        radius: f64,
        budget: CdpBudget,
        noise: NoiseMode,
    },
    IterativeUpdating {
        radius: f64,
        budget: ApproxDpBudget,
        config: IterativeConfig,
        noise: NoiseMode,
    },
    /// Plain average of the per-sample gradients. Not private.
    SampleMean,
    /// ∇F(w) + `bias` + noise with E‖noise‖² = `noise_scale`². Ignores the
    /// samples and needs the closed-form gradient.
    Injected { bias: Array1<f64>, noise_scale: f64 },
}

impl GradientEstimator {
    /// Simple clipping with the radius and per-step budget of `schedule`.
    pub fn simple_clipping(schedule: &Schedule) -> Result<Self> {
        match schedule.step_budget {
            Some(StepBudget::Cdp(budget)) => Ok(Self::SimpleClipping {
                radius: schedule.clip_radius,
                budget,
                noise: NoiseMode::Private,
            }),
            _ => Err(invalid("schedule carries no zCDP step budget")),
        }
    }

    /// Iterative updating with the radius and per-step budget of `schedule`.
    pub fn iterative(schedule: &Schedule, config: IterativeConfig) -> Result<Self> {
        match schedule.step_budget {
            Some(StepBudget::ApproxDp(budget)) => Ok(Self::IterativeUpdating {
                radius: schedule.clip_radius,
                budget,
                config,
                noise: NoiseMode::Private,
            }),
            _ => Err(invalid("schedule carries no (epsilon, delta) step budget")),
        }
    }

    fn uses_samples(&self) -> bool {
        !matches!(self, Self::Injected { .. })
    }

    /// Gradient estimate from the per-sample gradients `grads` (one per row).
    pub fn estimate<R: Rng + ?Sized>(
        &self,
        problem: &ProblemInstance,
        w: ArrayView1<f64>,
        grads: ArrayView2<f64>,
        rng: &mut R,
    ) -> Result<Array1<f64>> {
        match self {
            Self::SimpleClipping {
                radius,
                budget,
                noise,
            } => Ok(simple_clip_mean(grads, &ClipConfig::new(*radius)?, *budget, *noise, rng)?.value),
            Self::IterativeUpdating {
                radius,
                budget,
                config,
                noise,
            } => Ok(iterative_update_mean(
                grads,
                &ClipConfig::new(*radius)?,
                *budget,
                config,
                *noise,
                rng,
            )?
            .value),
            Self::SampleMean => grads
                .mean_axis(Axis(0))
                .ok_or_else(|| invalid("cannot average zero gradients")),
            Self::Injected { bias, noise_scale } => {
                let truth = problem.truth.as_ref().ok_or_else(|| {
                    Error::UnsupportedProblem("injected estimator needs the closed-form gradient".into())
                })?;
                if bias.len() != problem.dimension {
                    return Err(invalid("bias dimension does not match the problem"));
                }
                let mut g = (truth.gradient)(w) + bias;
                let sd = noise_scale / (problem.dimension as f64).sqrt();
                add_gaussian_noise(&mut g, sd, rng);
                Ok(g)
            }
        }
    }
}

/// Iterates and output of one SGD run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace {
    /// w_1, …, w_T: the points at which gradients were estimated.
    pub iterates: Vec<Array1<f64>>,
    /// ŵ = (1/T) Σ w_t.
    pub averaged_output: Array1<f64>,
    /// F(ŵ) − F(w*), for problems with a known truth.
    pub excess_risk: Option<f64>,
    pub bias_proxy: Option<f64>,
    pub variance_proxy: Option<f64>,
}

fn per_sample_gradients(
    problem: &ProblemInstance,
    w: ArrayView1<f64>,
    samples: ArrayView2<f64>,
    out: &mut Array2<f64>,
) {
    for (z, row) in samples.axis_iter(Axis(0)).zip(out.axis_iter_mut(Axis(0))) {
        (problem.gradient)(w, z, row);
    }
}

/// Projected SGD: w_{t+1} = Π(w_t − η g(w_t)) for T steps, starting from
/// Π(w0), returning the averaged iterate.
pub fn sgd_loop<R: Rng + ?Sized>(
    problem: &ProblemInstance,
    samples: ArrayView2<f64>,
    schedule: &Schedule,
    estimator: &GradientEstimator,
    w0: ArrayView1<f64>,
    rng: &mut R,
) -> Result<RunTrace> {
    problem.validate()?;
    schedule.validate()?;
    if w0.len() != problem.dimension {
        return Err(invalid("starting point dimension does not match the problem"));
    }
    if estimator.uses_samples() && samples.nrows() == 0 {
        return Err(invalid("cannot run SGD on zero samples"));
    }

    let d = problem.dimension;
    let mut grads = Array2::<f64>::zeros((samples.nrows(), d));
    let mut w = problem.project(w0);
    let mut sum = Array1::<f64>::zeros(d);
    let mut iterates = Vec::with_capacity(schedule.steps);
    for step in 1..=schedule.steps {
        if estimator.uses_samples() {
            per_sample_gradients(problem, w.view(), samples, &mut grads);
        }
        let g = estimator.estimate(problem, w.view(), grads.view(), rng)?;
        if g.len() != d || !g.iter().all(|x| x.is_finite()) {
            return Err(Error::NonFiniteGradient { step });
        }
        sum += &w;
        let next = problem.project((&w - &(g * schedule.learning_rate)).view());
        iterates.push(w);
        w = next;
    }

    let averaged_output = sum / schedule.steps as f64;
    Ok(RunTrace {
        excess_risk: problem.excess_risk(averaged_output.view()),
        iterates,
        averaged_output,
        bias_proxy: None,
        variance_proxy: None,
    })
}

/// Empirical bias ‖mean(g) − ∇F(w)‖ and second moment mean ‖g − ∇F(w)‖² of
/// `estimator` at a fixed `w`, over `reps` fresh datasets from `draw`.
pub fn empirical_bias_variance<R, S>(
    problem: &ProblemInstance,
    w: ArrayView1<f64>,
    mut draw: S,
    estimator: &GradientEstimator,
    reps: usize,
    rng: &mut R,
) -> Result<(f64, f64)>
where
    R: Rng + ?Sized,
    S: FnMut(&mut R) -> Array2<f64>,
{
    let truth = problem.truth.as_ref().ok_or_else(|| {
        Error::UnsupportedProblem("bias and variance need the closed-form gradient".into())
    })?;
    if reps == 0 {
        return Err(invalid("reps must be at least 1"));
    }
    let grad_f = (truth.gradient)(w);
    let mut mean_diff = Array1::<f64>::zeros(problem.dimension);
    let mut second = 0.0;
    let mut grads = Array2::<f64>::zeros((0, problem.dimension));
    for _ in 0..reps {
        let samples = draw(rng);
        if estimator.uses_samples() {
            if grads.nrows() != samples.nrows() {
                grads = Array2::zeros((samples.nrows(), problem.dimension));
            }
            per_sample_gradients(problem, w, samples.view(), &mut grads);
        }
        let diff = estimator.estimate(problem, w, grads.view(), rng)? - &grad_f;
        second += diff.dot(&diff);
        mean_diff += &diff;
    }
    mean_diff /= reps as f64;
    Ok((mean_diff.dot(&mean_diff).sqrt(), second / reps as f64))
}
