// SPDX-License-Identifier: Apache-2.0

//! Projected stochastic gradient descent with private gradient estimates.
//!
//! Every step estimates the population gradient from all `n` per-sample
//! gradients at the current iterate, takes a step of size η and projects back
//! onto the feasible set. The output is the average of the iterates.

mod schedule;
mod sgd;

pub use schedule::{
    iterative_rates, schedule_iterative, schedule_simple_clipping, simple_clipping_rates,
    Schedule, StepBudget,
};
pub use sgd::{empirical_bias_variance, sgd_loop, GradientEstimator, RunTrace};

use crate::error::{invalid, Result};
use ndarray::{Array1, ArrayView1, ArrayViewMut1};
use std::fmt;
use std::sync::Arc;

/// Per-sample gradient ∇l(w, z), written into the output buffer.
pub type GradientFn =
    Arc<dyn Fn(ArrayView1<f64>, ArrayView1<f64>, ArrayViewMut1<f64>) + Send + Sync>;
pub type VectorFn = Arc<dyn Fn(ArrayView1<f64>) -> Array1<f64> + Send + Sync>;
pub type ScalarFn = Arc<dyn Fn(ArrayView1<f64>) -> f64 + Send + Sync>;

/// Euclidean projection onto the feasible set.
#[derive(Clone)]
pub enum Projection {
    /// Closed ball; the diameter of the set is `2 * radius`.
    Ball { center: Array1<f64>, radius: f64 },
    /// Any idempotent projection supplied by the caller.
    Custom(VectorFn),
}

impl Projection {
    pub fn ball(center: Array1<f64>, radius: f64) -> Result<Self> {
        if !(radius.is_finite() && radius > 0.0) {
            return Err(invalid(format!("ball radius must be positive, got {radius}")));
        }
        Ok(Projection::Ball { center, radius })
    }

    pub fn apply(&self, w: ArrayView1<f64>) -> Array1<f64> {
        match self {
            Projection::Ball { center, radius } => {
                let mut diff = &w - center;
                if diff.dot(&diff).sqrt() <= *radius {
                    return w.to_owned();
                }
                crate::estimators::clip_in_place(diff.view_mut(), *radius);
                let mut out = center + &diff;
                // Keep the projection idempotent after adding the center back.
                while (&out - center).dot(&(&out - center)).sqrt() > *radius {
                    diff.mapv_inplace(|v| v * (1.0 - f64::EPSILON));
                    out = center + &diff;
                }
                out
            }
            Projection::Custom(f) => f(w),
        }
    }
}

impl fmt::Debug for Projection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Projection::Ball { center, radius } => f
                .debug_struct("Ball")
                .field("center", center)
                .field("radius", radius)
                .finish(),
            Projection::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

/// Closed-form population quantities of a synthetic problem.
#[derive(Clone)]
pub struct KnownTruth {
    pub minimizer: Array1<f64>,
    pub min_value: f64,
    /// Population risk F.
    pub objective: ScalarFn,
    /// Population gradient ∇F.
    pub gradient: VectorFn,
}

impl fmt::Debug for KnownTruth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KnownTruth")
            .field("minimizer", &self.minimizer)
            .field("min_value", &self.min_value)
            .finish_non_exhaustive()
    }
}

/// A stochastic convex problem: per-sample gradients, a feasible set and the
/// constants the schedules depend on.
#[derive(Clone)]
pub struct ProblemInstance {
    pub dimension: usize,
    pub gradient: GradientFn,
    pub projection: Projection,
    /// Diameter L of the feasible set.
    pub diameter: f64,
    /// Smoothness λ of the population risk.
    pub smoothness: f64,
    /// Bound M on the directional p-th moments of the gradients.
    pub moment_bound: f64,
    /// Moment order p.
    pub moment_order: f64,
    pub truth: Option<KnownTruth>,
}

impl fmt::Debug for ProblemInstance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemInstance")
            .field("dimension", &self.dimension)
            .field("projection", &self.projection)
            .field("diameter", &self.diameter)
            .field("smoothness", &self.smoothness)
            .field("moment_bound", &self.moment_bound)
            .field("moment_order", &self.moment_order)
            .field("truth", &self.truth)
            .finish_non_exhaustive()
    }
}

impl ProblemInstance {
    pub fn new(
        dimension: usize,
        gradient: GradientFn,
        projection: Projection,
        diameter: f64,
        smoothness: f64,
        moment_bound: f64,
        moment_order: f64,
    ) -> Result<Self> {
        let problem = Self {
            dimension,
            gradient,
            projection,
            diameter,
            smoothness,
            moment_bound,
            moment_order,
            truth: None,
        };
        problem.validate()?;
        Ok(problem)
    }

    pub fn with_truth(mut self, truth: KnownTruth) -> Self {
        self.truth = Some(truth);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.dimension == 0 {
            return Err(invalid("dimension must be at least 1"));
        }
        for (name, v) in [
            ("diameter", self.diameter),
            ("smoothness", self.smoothness),
            ("moment bound", self.moment_bound),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(invalid(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.moment_order.is_finite() && self.moment_order >= 2.0) {
            return Err(invalid(format!(
                "moment order must be at least 2, got {}",
                self.moment_order
            )));
        }
        Ok(())
    }

    /// ∇l(w, z) as a fresh vector.
    pub fn gradient_at(&self, w: ArrayView1<f64>, z: ArrayView1<f64>) -> Array1<f64> {
        let mut out = Array1::zeros(self.dimension);
        (self.gradient)(w, z, out.view_mut());
        out
    }

    pub fn project(&self, w: ArrayView1<f64>) -> Array1<f64> {
        self.projection.apply(w)
    }

    /// Starting point Π(0).
    pub fn default_start(&self) -> Array1<f64> {
        self.project(Array1::zeros(self.dimension).view())
    }

    /// F(w) − F(w*), when the truth is known.
    pub fn excess_risk(&self, w: ArrayView1<f64>) -> Option<f64> {
        self.truth
            .as_ref()
            .map(|t| (t.objective)(w) - t.min_value)
    }
}
