// SPDX-License-Identifier: Apache-2.0

//! Differentially private mean estimation and projected stochastic gradient
//! descent for convex problems whose gradients are heavy-tailed.
//!
//! * [`privacy`]: budgets, composition, conversions and per-step splits.
//! * [`estimators`]: the clipped-mean estimator and the grouped iterative
//!   estimator with its trimmed direction/distance program.
//! * [`optimizer`]: the projected SGD loop and its parameter schedules.
//! * [`synthetic`]: heavy-tailed generators with certified moment bounds and
//!   quadratic test problems with known minimizers.

pub mod error;
pub mod estimators;
pub mod optimizer;
pub mod privacy;
pub mod rng;
pub mod stats;
pub mod synthetic;

pub use error::{Error, Result};
pub use estimators::{
    clip, clipping_bias_bound, est_brute_force, est_direction_distance, group_averages,
    iterative_update_mean, simple_clip_mean, BudgetSpent, ClipConfig, EstOutcome, GroupedStats,
    InitialPoint, IterativeConfig, MeanEstimate, NoiseMode, RemainderPolicy,
};
pub use optimizer::{
    empirical_bias_variance, schedule_iterative, schedule_simple_clipping, sgd_loop,
    GradientEstimator, KnownTruth, ProblemInstance, Projection, RunTrace, Schedule, StepBudget,
};
pub use privacy::{ApproxDpBudget, CdpBudget, NoiseScale, SensitivityBound};
pub use synthetic::{make_quadratic_problem, verify_moment_bound, Family, HeavyTailSpec, MomentReport};
