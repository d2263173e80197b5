// SPDX-License-Identifier: Apache-2.0

use super::ProblemInstance;
use crate::error::{invalid, Error, Result};
use crate::privacy::{
    per_step_cdp_budget, per_step_dp_budget, simple_clipping_total_rho, ApproxDpBudget, CdpBudget,
};

/// Privacy budget charged by each gradient estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepBudget {
    Cdp(CdpBudget),
    ApproxDp(ApproxDpBudget),
}

/// Step count T, step size η and clip radius R of one SGD run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Schedule {
    pub steps: usize,
    pub learning_rate: f64,
    pub clip_radius: f64,
    /// Per-step budget, when the schedule came from a total budget.
    pub step_budget: Option<StepBudget>,
}

impl Schedule {
    pub fn new(steps: usize, learning_rate: f64, clip_radius: f64) -> Result<Self> {
        let s = Self {
            steps,
            learning_rate,
            clip_radius,
            step_budget: None,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(invalid("schedule needs at least one step"));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(invalid(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if !(self.clip_radius.is_finite() && self.clip_radius > 0.0) {
            return Err(invalid(format!(
                "clip radius must be positive, got {}",
                self.clip_radius
            )));
        }
        Ok(())
    }
}

fn steps_from(x: f64) -> Result<usize> {
    if !x.is_finite() || x > usize::MAX as f64 / 2.0 {
        return Err(Error::ResourceLimit(format!("step count {x} is not representable")));
    }
    Ok((x.ceil() as usize).max(1))
}

fn check_sizes(n: usize, d: usize, p: f64) -> Result<()> {
    if n == 0 || d == 0 {
        return Err(invalid("n and d must be at least 1"));
    }
    if !(p.is_finite() && p >= 2.0) {
        return Err(invalid(format!("moment order must be at least 2, got {p}")));
    }
    Ok(())
}

/// Dimensionless radius and step count for simple clipping under total zCDP
/// budget ρ:
///
/// R = √d · min((n√ρ/√d)^{1/p}, (n/d)^{1/p}),  T = max(1, ⌈ρn²/(dR²)⌉).
pub fn simple_clipping_rates(n: usize, d: usize, p: f64, rho: f64) -> Result<(f64, usize)> {
    check_sizes(n, d, p)?;
    let (nf, df) = (n as f64, d as f64);
    let sd = df.sqrt();
    let r = sd * (nf * rho.sqrt() / sd).powf(1.0 / p).min((nf / df).powf(1.0 / p));
    let steps = steps_from(rho * nf * nf / (df * r * r))?;
    Ok((r, steps))
}

/// Dimensionless radius and step count for the iterative estimator:
///
/// R = √d · (nε/√d)^{1/p},  T = max(1, ⌈n²ε²/(dR²)⌉).
pub fn iterative_rates(n: usize, d: usize, p: f64, eps: f64) -> Result<(f64, usize)> {
    check_sizes(n, d, p)?;
    let (nf, df) = (n as f64, d as f64);
    let sd = df.sqrt();
    let r = sd * (nf * eps / sd).powf(1.0 / p);
    let steps = steps_from(nf * nf * eps * eps / (df * r * r))?;
    Ok((r, steps))
}

fn learning_rate(steps: usize, smoothness: f64) -> f64 {
    1.0 / (2.0 * steps as f64 * smoothness * smoothness).sqrt()
}

fn check_multiplier(m: f64) -> Result<()> {
    if !(m.is_finite() && m > 0.0) {
        return Err(invalid(format!("radius multiplier must be positive, got {m}")));
    }
    Ok(())
}

/// Schedule for SGD with the simple clipping estimator at total (ε, δ).
///
/// The radius is `radius_multiplier · M` times the dimensionless rate; T is
/// computed from the dimensionless rate, and each step receives ρ/T.
pub fn schedule_simple_clipping(
    n: usize,
    problem: &ProblemInstance,
    total: ApproxDpBudget,
    radius_multiplier: f64,
) -> Result<Schedule> {
    problem.validate()?;
    check_multiplier(radius_multiplier)?;
    let rho = simple_clipping_total_rho(total.epsilon(), total.delta())?;
    let (r, steps) = simple_clipping_rates(n, problem.dimension, problem.moment_order, rho.rho())?;
    let step = per_step_cdp_budget(total.epsilon(), total.delta(), steps)?;
    Ok(Schedule {
        steps,
        learning_rate: learning_rate(steps, problem.smoothness),
        clip_radius: r * problem.moment_bound * radius_multiplier,
        step_budget: Some(StepBudget::Cdp(step)),
    })
}

/// Schedule for SGD with the iterative estimator at total (ε, δ), with each
/// step receiving (ε₀, δ₀) from advanced composition over T steps.
pub fn schedule_iterative(
    n: usize,
    problem: &ProblemInstance,
    total: ApproxDpBudget,
    radius_multiplier: f64,
) -> Result<Schedule> {
    problem.validate()?;
    check_multiplier(radius_multiplier)?;
    if total.epsilon() > 1.0 {
        return Err(Error::OutOfRegime {
            what: format!("epsilon = {}", total.epsilon()),
            bound: "epsilon <= 1".into(),
        });
    }
    let (r, steps) = iterative_rates(n, problem.dimension, problem.moment_order, total.epsilon())?;
    let step = per_step_dp_budget(total, steps)?;
    Ok(Schedule {
        steps,
        learning_rate: learning_rate(steps, problem.smoothness),
        clip_radius: r * problem.moment_bound * radius_multiplier,
        step_budget: Some(StepBudget::ApproxDp(step)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optimizer::Projection;
    use ndarray::Array1;
    use proptest::prelude::*;
    use std::sync::Arc;

    fn problem(d: usize, p: f64, m: f64, lambda: f64) -> ProblemInstance {
        ProblemInstance::new(
            d,
            Arc::new(|_, _, mut out| out.fill(0.0)),
            Projection::ball(Array1::zeros(d), 1.0).unwrap(),
            2.0,
            lambda,
            m,
            p,
        )
        .unwrap()
    }

    #[test]
    fn simple_rates_unit_example() {
        let (r, t) = simple_clipping_rates(100, 1, 2.0, 1.0).unwrap();
        assert_eq!(r, 10.0);
        assert_eq!(t, 100);
        assert!((learning_rate(t, 3.0) - 1.0 / (3.0 * 200f64.sqrt())).abs() < 1e-15);
    }

    #[test]
    fn iterative_unit_example() {
        let pr = problem(1, 2.0, 1.0, 1.0);
        let s = schedule_iterative(100, &pr, ApproxDpBudget::new(1.0, 1e-5).unwrap(), 1.0).unwrap();
        assert_eq!(s.clip_radius, 10.0);
        assert_eq!(s.steps, 100);
        assert!(matches!(s.step_budget, Some(StepBudget::ApproxDp(_))));
    }

    #[test]
    fn radius_scales_with_moment_bound_and_multiplier() {
        let total = ApproxDpBudget::new(0.5, 1e-5).unwrap();
        let a = schedule_simple_clipping(5000, &problem(3, 2.0, 1.0, 1.0), total, 1.0).unwrap();
        let b = schedule_simple_clipping(5000, &problem(3, 2.0, 4.0, 1.0), total, 0.5).unwrap();
        assert!((b.clip_radius - 2.0 * a.clip_radius).abs() < 1e-12 * a.clip_radius);
        assert_eq!(a.steps, b.steps);
    }

    #[test]
    fn epsilon_above_one_is_out_of_regime() {
        let total = ApproxDpBudget::new(1.5, 1e-5).unwrap();
        let pr = problem(2, 2.0, 1.0, 1.0);
        assert!(matches!(
            schedule_simple_clipping(1000, &pr, total, 1.0),
            Err(Error::OutOfRegime { .. })
        ));
        assert!(matches!(
            schedule_iterative(1000, &pr, total, 1.0),
            Err(Error::OutOfRegime { .. })
        ));
    }

    #[test]
    fn tiny_budget_still_takes_one_step() {
        let (_, t) = simple_clipping_rates(10, 50, 2.0, 1e-12).unwrap();
        assert_eq!(t, 1);
        let (_, t) = iterative_rates(2, 50, 4.0, 1e-9).unwrap();
        assert_eq!(t, 1);
    }

    proptest! {
        #[test]
        fn radius_increases_with_n(n in 1usize..100_000, d in 1usize..50, p in 2.0f64..6.0, rho in 1e-4f64..10.0) {
            let (r1, _) = simple_clipping_rates(n, d, p, rho).unwrap();
            let (r2, _) = simple_clipping_rates(n + 1, d, p, rho).unwrap();
            prop_assert!(r2 > r1);
        }

        #[test]
        fn iterative_radius_increases_with_eps(n in 1usize..100_000, d in 1usize..50, p in 2.0f64..6.0, eps in 1e-3f64..1.0) {
            let (r1, _) = iterative_rates(n, d, p, eps).unwrap();
            let (r2, _) = iterative_rates(n, d, p, eps * 1.01).unwrap();
            prop_assert!(r2 > r1);
        }

        #[test]
        fn iterative_steps_match_closed_form(n in 1usize..1_000_000, d in 1usize..100, p in 2.0f64..8.0, eps in 1e-3f64..1.0) {
            let (_, t) = iterative_rates(n, d, p, eps).unwrap();
            let df = d as f64;
            let closed = (n as f64 * eps / df.sqrt()).powf(2.0 - 2.0 / p) / df;
            // Equal up to the ceiling, with slack for rounding at integers.
            prop_assert!(t as f64 >= closed * (1.0 - 1e-12));
            prop_assert!((t as f64) < closed.max(1.0) * (1.0 + 1e-12) + 1.0);
        }
    }
}
