// SPDX-License-Identifier: Apache-2.0

use super::{add_gaussian_noise, clip_in_place, ClipConfig, NoiseMode};
use crate::error::{invalid, Result};
use crate::privacy::{clipped_mean_sensitivity, gaussian_noise_scale, CdpBudget, NoiseScale};
use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rand::seq::SliceRandom;
use rand::Rng;

/// What to do when the group count does not divide the sample count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RemainderPolicy {
    /// Fail with an invalid-argument error.
    #[default]
    Reject,
    /// Drop `n mod k` samples chosen uniformly at random.
    DropRandom,
}

/// Noisy clipped averages of `k` equally sized groups.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupedStats {
    group_means: Array2<f64>,
    group_size: usize,
    noise_scale: Option<NoiseScale>,
}

impl GroupedStats {
    /// Wrap precomputed group means (one per row). Used by tests and by
    /// callers that form groups themselves.
    pub fn from_means(group_means: Array2<f64>, group_size: usize) -> Result<Self> {
        if group_means.nrows() == 0 || group_means.ncols() == 0 {
            return Err(invalid("grouped statistics need at least one group of positive dimension"));
        }
        if group_size == 0 {
            return Err(invalid("group size must be at least 1"));
        }
        Ok(Self {
            group_means,
            group_size,
            noise_scale: None,
        })
    }

    pub fn group_means(&self) -> ArrayView2<'_, f64> {
        self.group_means.view()
    }

    pub fn group(&self, j: usize) -> ArrayView1<'_, f64> {
        self.group_means.row(j)
    }

    pub fn k(&self) -> usize {
        self.group_means.nrows()
    }

    pub fn dim(&self) -> usize {
        self.group_means.ncols()
    }

    pub fn group_size(&self) -> usize {
        self.group_size
    }

    /// `None` when noise was disabled.
    pub fn noise_scale(&self) -> Option<NoiseScale> {
        self.noise_scale
    }

    /// The same statistics with the group means in lexicographic order.
    pub fn canonical(&self) -> Self {
        let k = self.k();
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by(|&a, &b| {
            let (ra, rb) = (self.group_means.row(a), self.group_means.row(b));
            ra.iter()
                .zip(rb.iter())
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        let means = Array2::from_shape_fn((k, self.dim()), |(i, j)| self.group_means[[order[i], j]]);
        Self {
            group_means: means,
            group_size: self.group_size,
            noise_scale: self.noise_scale,
        }
    }

    /// Apply a permutation to the group order.
    pub fn permuted(&self, order: &[usize]) -> Self {
        assert_eq!(order.len(), self.k());
        let means =
            Array2::from_shape_fn((self.k(), self.dim()), |(i, j)| self.group_means[[order[i], j]]);
        Self {
            group_means: means,
            group_size: self.group_size,
            noise_scale: self.noise_scale,
        }
    }
}

/// Randomly partition the samples into `k` bins of size m = ⌊n/k⌋, clip each
/// sample to R and release each bin mean plus N(0, 2R²/(ρm²)) noise per
/// coordinate. Each released mean is ρ-zCDP with respect to its own bin.
pub fn group_averages<R: Rng + ?Sized>(
    samples: ArrayView2<f64>,
    k: usize,
    cfg: &ClipConfig,
    group_budget: CdpBudget,
    remainder: RemainderPolicy,
    noise: NoiseMode,
    rng: &mut R,
) -> Result<GroupedStats> {
    let n = samples.nrows();
    let d = samples.ncols();
    if k == 0 {
        return Err(invalid("group count must be at least 1"));
    }
    if k > n {
        return Err(invalid(format!("group count {k} exceeds sample count {n}")));
    }
    if !n.is_multiple_of(k) && remainder == RemainderPolicy::Reject {
        return Err(invalid(format!("group count {k} does not divide sample count {n}")));
    }
    if d == 0 {
        return Err(invalid("samples must have positive dimension"));
    }
    let m = n / k;

    // One shuffle gives both the random partition and the random remainder drop.
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);

    let noise_scale = match noise {
        NoiseMode::Private => Some(gaussian_noise_scale(
            clipped_mean_sensitivity(cfg.radius(), m)?,
            group_budget,
        )?),
        NoiseMode::Disabled => None,
    };

    let mut means = Array2::<f64>::zeros((k, d));
    let mut row = Array1::<f64>::zeros(d);
    for (j, bin) in order.chunks_exact(m).take(k).enumerate() {
        let mut acc = Array1::<f64>::zeros(d);
        for &i in bin {
            row.assign(&samples.row(i));
            clip_in_place(row.view_mut(), cfg.radius());
            acc += &row;
        }
        acc /= m as f64;
        if let Some(scale) = noise_scale {
            add_gaussian_noise(&mut acc, scale.sigma(), rng);
        }
        means.row_mut(j).assign(&acc);
    }

    Ok(GroupedStats {
        group_means: means,
        group_size: m,
        noise_scale,
    })
}
