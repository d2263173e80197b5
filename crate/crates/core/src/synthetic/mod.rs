// SPDX-License-Identifier: Apache-2.0

//! Heavy-tailed test distributions with a known bound on their directional
//! p-th moments, moment verification, and quadratic problems with known
//! minimizers.
//!
//! Every family is an isotropic base vector B rescaled so that
//! E|⟨u, X − μ⟩|^p = M^p for every unit u, then shifted by μ.

mod problem;
mod verify;

pub use problem::make_quadratic_problem;
pub use verify::{verify_moment_bound, MomentReport};

use crate::error::{invalid, Result};
use ndarray::{Array1, Array2, ArrayViewMut1, Axis};
use rand::Rng;
use rand_distr::{ChiSquared, Distribution, Pareto, StandardNormal};
use statrs::function::gamma::ln_gamma;
use std::f64::consts::PI;

/// Shape of the isotropic base distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Family {
    /// Standard normal.
    Gaussian,
    /// Multivariate t: Z / √(W/ν) with W ~ χ²_ν. Moments of order < ν exist.
    StudentLike { nu: f64 },
    /// V·Z with V = 1, or with probability `outlier_prob` V ~ Pareto(1, shape).
    /// Moments of order < `shape` exist.
    ParetoSymmetric { shape: f64, outlier_prob: f64 },
}

impl Family {
    /// Student-like family with tail index p + 1/2.
    pub fn student_like(p: f64) -> Self {
        Family::StudentLike { nu: p + 0.5 }
    }

    /// Pareto mixture with tail index p + 1/2 and 5% outliers.
    pub fn pareto_symmetric(p: f64) -> Self {
        Family::ParetoSymmetric {
            shape: p + 0.5,
            outlier_prob: 0.05,
        }
    }

    /// Supremum of the orders with a finite absolute moment.
    pub fn tail_index(&self) -> f64 {
        match *self {
            Family::Gaussian => f64::INFINITY,
            Family::StudentLike { nu } => nu,
            Family::ParetoSymmetric { shape, .. } => shape,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Family::Gaussian => "gaussian",
            Family::StudentLike { .. } => "student",
            Family::ParetoSymmetric { .. } => "pareto",
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            Family::Gaussian => Ok(()),
            Family::StudentLike { nu } if nu.is_finite() && nu > 0.0 => Ok(()),
            Family::ParetoSymmetric {
                shape,
                outlier_prob,
            } if shape.is_finite() && shape > 0.0 && (0.0..=1.0).contains(&outlier_prob) => Ok(()),
            f => Err(invalid(format!("invalid family parameters {f:?}"))),
        }
    }

    /// E|⟨u, B⟩|^p for a unit vector u, or `None` when it is infinite.
    pub fn directional_moment(&self, p: f64) -> Option<f64> {
        if p >= self.tail_index() {
            return None;
        }
        // E|N(0,1)|^p = 2^{p/2} Γ((p+1)/2) / √π.
        let ln_normal = 0.5 * p * 2f64.ln() + ln_gamma(0.5 * (p + 1.0)) - 0.5 * PI.ln();
        Some(match *self {
            Family::Gaussian => ln_normal.exp(),
            // E|t_ν|^p = ν^{p/2} Γ((p+1)/2) Γ((ν−p)/2) / (√π Γ(ν/2)).
            Family::StudentLike { nu } => (0.5 * p * nu.ln() + ln_gamma(0.5 * (p + 1.0))
                + ln_gamma(0.5 * (nu - p))
                - 0.5 * PI.ln()
                - ln_gamma(0.5 * nu))
                .exp(),
            Family::ParetoSymmetric {
                shape,
                outlier_prob,
            } => {
                let v_moment = (1.0 - outlier_prob) + outlier_prob * shape / (shape - p);
                v_moment * ln_normal.exp()
            }
        })
    }

    fn draw_into<R: Rng + ?Sized>(&self, mut out: ArrayViewMut1<f64>, rng: &mut R) {
        for x in out.iter_mut() {
            *x = rng.sample(StandardNormal);
        }
        let factor = match *self {
            Family::Gaussian => 1.0,
            Family::StudentLike { nu } => {
                let w: f64 = ChiSquared::new(nu).expect("validated").sample(rng);
                (nu / w).sqrt()
            }
            Family::ParetoSymmetric {
                shape,
                outlier_prob,
            } => {
                if rng.random_bool(outlier_prob) {
                    Pareto::new(1.0, shape).expect("validated").sample(rng)
                } else {
                    1.0
                }
            }
        };
        out *= factor;
    }
}

/// A distribution on R^d with mean μ and E|⟨u, X − μ⟩|^p ≤ M^p.
#[derive(Debug, Clone, PartialEq)]
pub struct HeavyTailSpec {
    dimension: usize,
    moment_order: f64,
    moment_bound: f64,
    family: Family,
    mean: Array1<f64>,
    scale: f64,
}

impl HeavyTailSpec {
    /// Checks that the family has a finite p-th moment and rescales it so the
    /// directional p-th moment is exactly M^p.
    pub fn new(
        dimension: usize,
        moment_order: f64,
        moment_bound: f64,
        family: Family,
        mean: Array1<f64>,
    ) -> Result<Self> {
        let mut spec = Self::new_unchecked(dimension, moment_order, moment_bound, family, mean)?;
        let m = family.directional_moment(moment_order).ok_or_else(|| {
            invalid(format!(
                "{} family with tail index {} has no finite moment of order {moment_order}",
                family.name(),
                family.tail_index()
            ))
        })?;
        spec.scale = moment_bound / m.powf(1.0 / moment_order);
        Ok(spec)
    }

    /// Like [`HeavyTailSpec::new`] but accepts families without a finite p-th
    /// moment, scaling the base by M instead. Used for negative controls.
    pub fn new_unchecked(
        dimension: usize,
        moment_order: f64,
        moment_bound: f64,
        family: Family,
        mean: Array1<f64>,
    ) -> Result<Self> {
        if dimension == 0 {
            return Err(invalid("dimension must be at least 1"));
        }
        if mean.len() != dimension {
            return Err(invalid("mean length does not match the dimension"));
        }
        if !(moment_order.is_finite() && moment_order >= 2.0) {
            return Err(invalid(format!("moment order must be at least 2, got {moment_order}")));
        }
        if !(moment_bound.is_finite() && moment_bound > 0.0) {
            return Err(invalid(format!("moment bound must be positive, got {moment_bound}")));
        }
        family.validate()?;
        Ok(Self {
            dimension,
            moment_order,
            moment_bound,
            family,
            mean,
            scale: moment_bound,
        })
    }

    /// Centered spec (μ = 0).
    pub fn centered(dimension: usize, moment_order: f64, moment_bound: f64, family: Family) -> Result<Self> {
        Self::new(dimension, moment_order, moment_bound, family, Array1::zeros(dimension))
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn moment_order(&self) -> f64 {
        self.moment_order
    }

    pub fn moment_bound(&self) -> f64 {
        self.moment_bound
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn mean(&self) -> &Array1<f64> {
        &self.mean
    }

    /// Factor applied to the base vector.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// `n` i.i.d. draws, one per row.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Array2<f64> {
        let mut out = Array2::<f64>::zeros((n, self.dimension));
        for mut row in out.axis_iter_mut(Axis(0)) {
            self.family.draw_into(row.view_mut(), rng);
            row *= self.scale;
            row += &self.mean;
        }
        out
    }
}

/// `n` i.i.d. draws from `spec`, one per row.
pub fn sample<R: Rng + ?Sized>(spec: &HeavyTailSpec, n: usize, rng: &mut R) -> Array2<f64> {
    spec.sample(n, rng)
}
