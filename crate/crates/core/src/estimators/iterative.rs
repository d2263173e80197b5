// SPDX-License-Identifier: Apache-2.0

use super::{
    est_direction_distance, group_averages, BudgetSpent, ClipConfig, GroupedStats, MeanEstimate,
    NoiseMode, RemainderPolicy,
};
use crate::error::{invalid, Result};
use crate::privacy::{shuffle_amplified_group_budget, ApproxDpBudget, CdpBudget};
use ndarray::{Array1, ArrayView2, Axis};
use rand::Rng;

/// Step size η of the iterate update c ← c + η·d·g.
pub const STEP_SIZE: f64 = 0.25;

/// Where the iteration starts.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum InitialPoint {
    /// Coordinate-wise median of the group means.
    #[default]
    GroupMedian,
    Fixed(Array1<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterativeConfig {
    /// Number of groups k.
    pub groups: usize,
    /// Number of iterations t_c.
    pub iterations: usize,
    pub remainder: RemainderPolicy,
    pub initial: InitialPoint,
}

impl IterativeConfig {
    pub fn new(groups: usize, iterations: usize) -> Self {
        Self {
            groups,
            iterations,
            remainder: RemainderPolicy::Reject,
            initial: InitialPoint::GroupMedian,
        }
    }
}

/// Result of running the iterate updates over fixed group statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationTrace {
    /// The selected iterate c_{l*}, l* = argmin_l d_l (earliest on ties).
    pub estimate: Array1<f64>,
    /// `(c_l, d_l)` for l = 1..=t_c.
    pub steps: Vec<(Array1<f64>, f64)>,
    /// Direction g_l used at each step.
    pub directions: Vec<Array1<f64>>,
}

/// Run t_c iterate updates over the group means and return the iterate with
/// the smallest estimated distance.
///
/// The group means are first put into lexicographic order, so the result is
/// bit-for-bit independent of the order in which the groups are supplied.
pub fn iterate_over_groups(
    stats: &GroupedStats,
    iterations: usize,
    initial: &InitialPoint,
) -> Result<IterationTrace> {
    if iterations == 0 {
        return Err(invalid("iteration count must be at least 1"));
    }
    let stats = stats.canonical();
    let mut c = match initial {
        InitialPoint::GroupMedian => stats
            .group_means()
            .axis_iter(Axis(1))
            .map(|col| crate::stats::median(&col.to_vec()))
            .collect::<Array1<f64>>(),
        InitialPoint::Fixed(c) => {
            if c.len() != stats.dim() {
                return Err(invalid("initial point dimension does not match the samples"));
            }
            c.clone()
        }
    };

    let mut steps = Vec::with_capacity(iterations);
    let mut directions = Vec::with_capacity(iterations);
    for _ in 0..iterations {
        let out = est_direction_distance(&stats, c.view())?;
        let next = &c + &(&out.direction * (STEP_SIZE * out.distance));
        steps.push((c, out.distance));
        directions.push(out.direction);
        c = next;
    }

    let mut best = 0;
    for (l, (_, d)) in steps.iter().enumerate() {
        if *d < steps[best].1 {
            best = l;
        }
    }
    Ok(IterationTrace {
        estimate: steps[best].0.clone(),
        steps,
        directions,
    })
}

/// Grouped iterative mean estimator.
///
/// Splits `total` across the `k` groups with the shuffle amplification bound,
/// forms noisy clipped group means, then runs [`iterate_over_groups`]. The
/// output depends on the group means only through a permutation-invariant map,
/// which is what makes the whole estimate `total`-DP.
pub fn iterative_update_mean<R: Rng + ?Sized>(
    samples: ArrayView2<f64>,
    cfg: &ClipConfig,
    total: ApproxDpBudget,
    config: &IterativeConfig,
    noise: NoiseMode,
    rng: &mut R,
) -> Result<MeanEstimate> {
    let group_budget = shuffle_amplified_group_budget(total, config.groups)?;
    iterative_with_group_budget(samples, cfg, group_budget, config, noise, rng).map(|mut est| {
        if noise == NoiseMode::Private {
            est.budget_spent = BudgetSpent::ApproxDp(total);
        }
        est
    })
}

/// [`iterative_update_mean`] with an explicit per-group zCDP budget.
pub(crate) fn iterative_with_group_budget<R: Rng + ?Sized>(
    samples: ArrayView2<f64>,
    cfg: &ClipConfig,
    group_budget: CdpBudget,
    config: &IterativeConfig,
    noise: NoiseMode,
    rng: &mut R,
) -> Result<MeanEstimate> {
    let stats = group_averages(
        samples,
        config.groups,
        cfg,
        group_budget,
        config.remainder,
        noise,
        rng,
    )?;
    let trace = iterate_over_groups(&stats, config.iterations, &config.initial)?;
    Ok(MeanEstimate {
        value: trace.estimate,
        iterate_trace: trace.steps,
        budget_spent: match noise {
            NoiseMode::Private => BudgetSpent::Cdp(group_budget),
            NoiseMode::Disabled => BudgetSpent::NonPrivate,
        },
    })
}
