// SPDX-License-Identifier: Apache-2.0

//! Differentially private mean estimators.
//!
//! Samples are passed as an `n × d` matrix, one sample per row.

mod clip;
mod est;
mod grouped;
mod iterative;
mod simple;

pub use clip::{clip, clip_in_place};
pub use est::{est_brute_force, est_direction_distance, selection_size, EstOutcome};
pub use grouped::{group_averages, GroupedStats, RemainderPolicy};
pub use iterative::{
    iterate_over_groups, iterative_update_mean, InitialPoint, IterativeConfig, IterationTrace,
    STEP_SIZE,
};
pub use simple::{clipped_mean, clipping_bias_bound, simple_clip_mean};

use crate::error::{invalid, Result};
use crate::privacy::{ApproxDpBudget, CdpBudget};
use ndarray::Array1;
use rand::Rng;
use rand_distr::StandardNormal;

/// Clipping radius R shared by both estimators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClipConfig {
    radius: f64,
}

impl ClipConfig {
    pub fn new(radius: f64) -> Result<Self> {
        if !(radius.is_finite() && radius > 0.0) {
            return Err(invalid(format!("clip radius must be positive, got {radius}")));
        }
        Ok(Self { radius })
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }
}

/// Whether the calibrated Gaussian noise is actually added.
///
/// `Disabled` produces a non-private estimate and exists for tests and
/// controls only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NoiseMode {
    #[default]
    Private,
    Disabled,
}

/// Privacy budget consumed by one estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BudgetSpent {
    Cdp(CdpBudget),
    ApproxDp(ApproxDpBudget),
    /// Noise was disabled; the estimate is not private.
    NonPrivate,
}

/// Output of a mean estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanEstimate {
    pub value: Array1<f64>,
    /// `(c_l, d_l)` for each iteration of the iterative estimator; empty for
    /// simple clipping.
    pub iterate_trace: Vec<(Array1<f64>, f64)>,
    pub budget_spent: BudgetSpent,
}

/// Add i.i.d. N(0, sigma²) noise to every coordinate.
pub(crate) fn add_gaussian_noise<R: Rng + ?Sized>(v: &mut Array1<f64>, sigma: f64, rng: &mut R) {
    for x in v.iter_mut() {
        let z: f64 = rng.sample(StandardNormal);
        *x += sigma * z;
    }
}
