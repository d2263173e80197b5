// SPDX-License-Identifier: Apache-2.0

//! Privacy accounting: budgets, composition, conversion between zero-concentrated
//! and approximate DP, Gaussian-mechanism calibration and per-step budget splits.
//!
//! Budgets are immutable values. Cumulative spending is tracked by
//! [`CdpLedger`] and [`ApproxDpLedger`], which reject spends beyond a declared total.

use crate::error::{invalid, Error, Result};
use std::f64::consts::E;

/// Relative slack allowed when comparing a composed budget against its total.
/// Only absorbs floating-point rounding of the closed forms.
const DOMINANCE_RTOL: f64 = 1e-12;

/// An (ε, δ) approximate differential privacy budget.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ApproxDpBudget {
    epsilon: f64,
    delta: f64,
}

impl ApproxDpBudget {
    pub fn new(epsilon: f64, delta: f64) -> Result<Self> {
        if !(epsilon.is_finite() && epsilon > 0.0) {
            return Err(invalid(format!("epsilon must be positive and finite, got {epsilon}")));
        }
        check_delta(delta)?;
        Ok(Self { epsilon, delta })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// True when `self` is at least as private as `other`, up to rounding.
    pub fn dominated_by(&self, other: &ApproxDpBudget) -> bool {
        self.epsilon <= other.epsilon * (1.0 + DOMINANCE_RTOL)
            && self.delta <= other.delta * (1.0 + DOMINANCE_RTOL)
    }
}

/// A ρ-zCDP budget.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct CdpBudget {
    rho: f64,
}

impl CdpBudget {
    pub fn new(rho: f64) -> Result<Self> {
        if !(rho.is_finite() && rho > 0.0) {
            return Err(invalid(format!("rho must be positive and finite, got {rho}")));
        }
        Ok(Self { rho })
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }
}

/// ℓ₂ sensitivity of a vector-valued statistic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensitivityBound {
    delta2: f64,
}

impl SensitivityBound {
    pub fn new(delta2: f64) -> Result<Self> {
        if !(delta2.is_finite() && delta2 >= 0.0) {
            return Err(invalid(format!("sensitivity must be nonnegative, got {delta2}")));
        }
        Ok(Self { delta2 })
    }

    pub fn delta2(&self) -> f64 {
        self.delta2
    }
}

/// Per-coordinate variance of the Gaussian noise added by a mechanism.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseScale {
    sigma2: f64,
}

impl NoiseScale {
    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn sigma(&self) -> f64 {
        self.sigma2.sqrt()
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta < 1.0 {
        Ok(())
    } else {
        Err(invalid(format!("delta must lie in (0, 1), got {delta}")))
    }
}

fn check_positive(name: &str, x: f64) -> Result<()> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        Err(invalid(format!("{name} must be positive and finite, got {x}")))
    }
}

/// Variance Δ₂²/(2ρ) of the Gaussian mechanism that makes a statistic of
/// sensitivity Δ₂ satisfy ρ-zCDP.
pub fn gaussian_noise_scale(sens: SensitivityBound, budget: CdpBudget) -> Result<NoiseScale> {
    if sens.delta2 <= 0.0 {
        return Err(invalid("sensitivity must be positive to calibrate noise"));
    }
    Ok(NoiseScale {
        sigma2: sens.delta2 * sens.delta2 / (2.0 * budget.rho),
    })
}

/// Replace-one sensitivity 2R/n of the mean of `n` vectors clipped to radius `radius`.
pub fn clipped_mean_sensitivity(radius: f64, n: usize) -> Result<SensitivityBound> {
    check_positive("radius", radius)?;
    if n == 0 {
        return Err(invalid("sample count must be at least 1"));
    }
    SensitivityBound::new(2.0 * radius / n as f64)
}

/// Sequential composition of zCDP mechanisms: the ρ values add.
pub fn cdp_compose(budgets: &[CdpBudget]) -> Result<CdpBudget> {
    if budgets.is_empty() {
        return Err(invalid("cannot compose an empty list of budgets"));
    }
    CdpBudget::new(budgets.iter().map(|b| b.rho).sum())
}

/// A pure ε-DP mechanism is (ε²/2)-zCDP.
pub fn dp_to_cdp(eps: f64) -> Result<CdpBudget> {
    check_positive("epsilon", eps)?;
    CdpBudget::new(eps * eps / 2.0)
}

/// A ρ-zCDP mechanism is (ρ + 2√(ρ ln(1/δ)), δ)-DP.
pub fn cdp_to_dp(budget: CdpBudget, delta: f64) -> Result<ApproxDpBudget> {
    check_delta(delta)?;
    let rho = budget.rho;
    let eps = rho + 2.0 * (rho * (1.0 / delta).ln()).sqrt();
    ApproxDpBudget::new(eps, delta)
}

/// Advanced composition of `k` mechanisms that are each `step`-DP:
/// (√(2k ln(1/δ′))·ε + kε(e^ε − 1), kδ + δ′).
pub fn advanced_composition(
    step: ApproxDpBudget,
    k: usize,
    delta_prime: f64,
) -> Result<ApproxDpBudget> {
    if k == 0 {
        return Err(invalid("composition count must be at least 1"));
    }
    check_delta(delta_prime)?;
    let kf = k as f64;
    let eps = step.epsilon;
    let total_eps = (2.0 * kf * (1.0 / delta_prime).ln()).sqrt() * eps + kf * eps * eps.exp_m1();
    let total_delta = kf * step.delta + delta_prime;
    if total_delta >= 1.0 {
        return Err(Error::AccountingOverflow { delta: total_delta });
    }
    ApproxDpBudget::new(total_eps, total_delta)
}

/// Total zCDP budget ε²/(1 + 2√(ln(1/δ)))² whose conversion at δ stays within ε
/// whenever ε ≤ 1.
pub fn simple_clipping_total_rho(total_eps: f64, delta: f64) -> Result<CdpBudget> {
    check_positive("epsilon", total_eps)?;
    check_delta(delta)?;
    let denom = 1.0 + 2.0 * (1.0 / delta).ln().sqrt();
    CdpBudget::new(total_eps * total_eps / (denom * denom))
}

/// Per-step zCDP budget ρ/T for a T-step run that must be (ε, δ)-DP overall.
///
/// Rejects ε > 1, where the conversion argument no longer covers the split;
/// see [`per_step_cdp_budget_unchecked`] for experiments outside that range.
pub fn per_step_cdp_budget(total_eps: f64, delta: f64, steps: usize) -> Result<CdpBudget> {
    if total_eps > 1.0 {
        return Err(Error::OutOfRegime {
            what: format!("epsilon = {total_eps}"),
            bound: "epsilon <= 1".into(),
        });
    }
    per_step_cdp_budget_unchecked(total_eps, delta, steps)
}

/// [`per_step_cdp_budget`] without the ε ≤ 1 check. The (ε, δ) guarantee does
/// not follow from the closed form when ε > 1.
pub fn per_step_cdp_budget_unchecked(
    total_eps: f64,
    delta: f64,
    steps: usize,
) -> Result<CdpBudget> {
    if steps == 0 {
        return Err(invalid("step count must be at least 1"));
    }
    let total = simple_clipping_total_rho(total_eps, delta)?;
    CdpBudget::new(total.rho / steps as f64)
}

/// Largest ε for which the shuffle amplification bound holds with `k` groups:
/// 8e²·√(ln(4/δ)/k).
pub fn shuffle_regime_bound(delta: f64, k: usize) -> f64 {
    8.0 * E * E * ((4.0 / delta).ln() / k as f64).sqrt()
}

/// zCDP budget each of `k` group statistics may spend so that any
/// permutation-invariant function of all of them is `total`-DP:
///
/// ρ = ε²k / (64e⁴ · ln(8/δ) · (1 + 2√(ln(12k/δ)))²).
pub fn shuffle_amplified_group_budget(total: ApproxDpBudget, k: usize) -> Result<CdpBudget> {
    if k == 0 {
        return Err(invalid("group count must be at least 1"));
    }
    let bound = shuffle_regime_bound(total.delta, k);
    if total.epsilon > bound {
        return Err(Error::OutOfRegime {
            what: format!("epsilon = {} with k = {k}", total.epsilon),
            bound: format!("epsilon <= 8e^2 sqrt(ln(4/delta)/k) = {bound}"),
        });
    }
    let kf = k as f64;
    let delta = total.delta;
    let inner = 1.0 + 2.0 * (12.0 * kf / delta).ln().sqrt();
    let rho = total.epsilon * total.epsilon * kf
        / (64.0 * E.powi(4) * (8.0 / delta).ln() * inner * inner);
    CdpBudget::new(rho)
}

/// Per-step (ε₀, δ₀) = (ε / (2√(2T ln(2/δ))), δ/(2T)) so that advanced
/// composition over T steps with δ′ = δ/2 stays within `total`.
pub fn per_step_dp_budget(total: ApproxDpBudget, steps: usize) -> Result<ApproxDpBudget> {
    if steps == 0 {
        return Err(invalid("step count must be at least 1"));
    }
    let t = steps as f64;
    let eps0 = total.epsilon / (2.0 * (2.0 * t * (2.0 / total.delta).ln()).sqrt());
    let delta0 = total.delta / (2.0 * t);
    ApproxDpBudget::new(eps0, delta0)
}

/// Tracks cumulative zCDP spend against a declared total.
///
/// Not synchronized; confine to one thread or wrap in a lock.
#[derive(Debug, Clone)]
pub struct CdpLedger {
    total: CdpBudget,
    spent: f64,
    spends: usize,
}

impl CdpLedger {
    pub fn new(total: CdpBudget) -> Self {
        Self {
            total,
            spent: 0.0,
            spends: 0,
        }
    }

    /// Record a spend, or reject it if it would exceed the total.
    pub fn spend(&mut self, budget: CdpBudget) -> Result<()> {
        let next = self.spent + budget.rho;
        if next > self.total.rho * (1.0 + DOMINANCE_RTOL) {
            return Err(Error::BudgetExceeded(format!(
                "spending rho = {} would bring the total to {next}, above {}",
                budget.rho, self.total.rho
            )));
        }
        self.spent = next;
        self.spends += 1;
        Ok(())
    }

    pub fn spent(&self) -> f64 {
        self.spent
    }

    pub fn remaining(&self) -> f64 {
        (self.total.rho - self.spent).max(0.0)
    }

    pub fn spends(&self) -> usize {
        self.spends
    }
}

/// Tracks repeated spends of one fixed (ε₀, δ₀) step budget, accounted by
/// advanced composition with slack `delta_prime`.
#[derive(Debug, Clone)]
pub struct ApproxDpLedger {
    total: ApproxDpBudget,
    step: ApproxDpBudget,
    delta_prime: f64,
    spends: usize,
}

impl ApproxDpLedger {
    pub fn new(total: ApproxDpBudget, step: ApproxDpBudget, delta_prime: f64) -> Result<Self> {
        check_delta(delta_prime)?;
        Ok(Self {
            total,
            step,
            delta_prime,
            spends: 0,
        })
    }

    /// Record one more step, or reject it if the composed budget would leave the total.
    pub fn spend(&mut self) -> Result<ApproxDpBudget> {
        let composed = advanced_composition(self.step, self.spends + 1, self.delta_prime)?;
        if !composed.dominated_by(&self.total) {
            return Err(Error::BudgetExceeded(format!(
                "step {} would compose to ({}, {}), beyond ({}, {})",
                self.spends + 1,
                composed.epsilon,
                composed.delta,
                self.total.epsilon,
                self.total.delta
            )));
        }
        self.spends += 1;
        Ok(composed)
    }

    pub fn spends(&self) -> usize {
        self.spends
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-12 * b.abs().max(1e-300)
    }

    #[test]
    fn noise_scale_examples() {
        let s = gaussian_noise_scale(SensitivityBound::new(0.2).unwrap(), CdpBudget::new(2.0).unwrap())
            .unwrap();
        assert!(close(s.sigma2(), 0.01));
        let s = gaussian_noise_scale(SensitivityBound::new(1.0).unwrap(), CdpBudget::new(0.5).unwrap())
            .unwrap();
        assert!(close(s.sigma2(), 1.0));
        assert!(gaussian_noise_scale(SensitivityBound::new(0.0).unwrap(), CdpBudget::new(1.0).unwrap())
            .is_err());
        assert!(CdpBudget::new(0.0).is_err());
        assert!(SensitivityBound::new(-1.0).is_err());
    }

    #[test]
    fn sensitivity_examples() {
        assert!(close(clipped_mean_sensitivity(1.0, 10).unwrap().delta2(), 0.2));
        assert_eq!(clipped_mean_sensitivity(1.0, 1).unwrap().delta2(), 2.0);
        assert!(close(clipped_mean_sensitivity(5.0, 1000).unwrap().delta2(), 0.01));
        assert!(clipped_mean_sensitivity(1.0, 0).is_err());
    }

    #[test]
    fn compose_examples() {
        let b = CdpBudget::new(0.1).unwrap();
        assert!(close(cdp_compose(&[b; 10]).unwrap().rho(), 1.0));
        assert_eq!(cdp_compose(&[b]).unwrap().rho(), 0.1);
        let two = [CdpBudget::new(0.2).unwrap(), CdpBudget::new(0.3).unwrap()];
        assert!(close(cdp_compose(&two).unwrap().rho(), 0.5));
        assert!(cdp_compose(&[]).is_err());
    }

    #[test]
    fn conversion_examples() {
        assert_eq!(dp_to_cdp(1.0).unwrap().rho(), 0.5);
        assert_eq!(dp_to_cdp(2.0).unwrap().rho(), 2.0);
        assert!(dp_to_cdp(0.0).is_err());

        let b = cdp_to_dp(CdpBudget::new(0.5).unwrap(), (-2.0f64).exp()).unwrap();
        assert!(close(b.epsilon(), 2.5));
        let b = cdp_to_dp(CdpBudget::new(2.0).unwrap(), (-1.0f64).exp()).unwrap();
        assert!(close(b.epsilon(), 2.0 + 2.0 * 2f64.sqrt()));
        assert!(cdp_to_dp(CdpBudget::new(1.0).unwrap(), 1.0).is_err());
        assert!(cdp_to_dp(CdpBudget::new(1.0).unwrap(), 0.0).is_err());
    }

    #[test]
    fn advanced_composition_examples() {
        let step = ApproxDpBudget::new(0.1, 1e-8).unwrap();
        let out = advanced_composition(step, 100, 1e-6).unwrap();
        let want = (200.0 * 1e6f64.ln()).sqrt() * 0.1 + 100.0 * 0.1 * (0.1f64.exp() - 1.0);
        assert!(close(out.epsilon(), want));
        assert!(close(out.delta(), 2e-6));

        let step = ApproxDpBudget::new(0.01, 1e-9).unwrap();
        let out = advanced_composition(step, 1, 1e-6).unwrap();
        let want = (2.0 * 1e6f64.ln()).sqrt() * 0.01 + 0.01 * (0.01f64.exp() - 1.0);
        assert!(close(out.epsilon(), want));

        let big = ApproxDpBudget::new(0.1, 0.2).unwrap();
        assert!(matches!(
            advanced_composition(big, 5, 0.1),
            Err(Error::AccountingOverflow { .. })
        ));
    }

    #[test]
    fn per_step_cdp_examples() {
        let delta = (-4.0f64).exp();
        assert!(close(per_step_cdp_budget(1.0, delta, 1).unwrap().rho(), 0.04));
        assert!(close(per_step_cdp_budget(1.0, delta, 4).unwrap().rho(), 0.01));
        assert!(matches!(
            per_step_cdp_budget(1.5, 1e-5, 1),
            Err(Error::OutOfRegime { .. })
        ));
        assert!(per_step_cdp_budget_unchecked(1.5, 1e-5, 1).is_ok());
        assert!(per_step_cdp_budget(0.5, 1e-5, 0).is_err());
    }

    #[test]
    fn per_step_dp_examples() {
        let total = ApproxDpBudget::new(1.0, 2.0 * (-1.0f64).exp()).unwrap();
        let step = per_step_dp_budget(total, 5).unwrap();
        assert!(close(step.epsilon(), 1.0 / (2.0 * 10f64.sqrt())));
        assert!(close(step.delta(), total.delta() / 10.0));

        let total = ApproxDpBudget::new(0.7, 1e-5).unwrap();
        let step = per_step_dp_budget(total, 1).unwrap();
        assert!(close(step.epsilon(), 0.7 / (2.0 * (2.0 * 2e5f64.ln()).sqrt())));
    }

    #[test]
    fn shuffle_budget_regression() {
        // ε = 0.1, δ = 1e-5, k = 800, evaluated once by hand and frozen.
        let total = ApproxDpBudget::new(0.1, 1e-5).unwrap();
        let rho = shuffle_amplified_group_budget(total, 800).unwrap().rho();
        let e4 = std::f64::consts::E.powi(4);
        let direct = 0.01 * 800.0
            / (64.0 * e4 * 8e5f64.ln() * (1.0 + 2.0 * 9.6e8f64.ln().sqrt()).powi(2));
        assert!(close(rho, direct));
        assert!((rho - 1.652_621_881_385_585_2e-6).abs() < 1e-18, "rho = {rho:e}");

        let too_big = ApproxDpBudget::new(50.0, 1e-5).unwrap();
        assert!(matches!(
            shuffle_amplified_group_budget(too_big, 800),
            Err(Error::OutOfRegime { .. })
        ));
    }

    #[test]
    fn shuffle_budget_increases_in_k() {
        let total = ApproxDpBudget::new(0.1, 1e-5).unwrap();
        let mut prev = 0.0;
        for k in (100..=10_000).step_by(100) {
            let rho = shuffle_amplified_group_budget(total, k).unwrap().rho();
            assert!(rho > prev, "k = {k}");
            prev = rho;
        }
    }

    #[test]
    fn calibration_identity() {
        for &(r, n, rho) in &[(1.0, 10usize, 0.3), (7.5, 1234, 2.0), (0.01, 3, 1e-4)] {
            let s = gaussian_noise_scale(
                clipped_mean_sensitivity(r, n).unwrap(),
                CdpBudget::new(rho).unwrap(),
            )
            .unwrap();
            let want = 2.0 * r * r / (rho * (n * n) as f64);
            assert!(close(s.sigma2(), want));
        }
    }

    #[test]
    fn cdp_ledger_rejects_overspend() {
        let mut ledger = CdpLedger::new(CdpBudget::new(1.0).unwrap());
        let step = per_step_cdp_budget_unchecked(1.0, 1e-5, 7).unwrap();
        let total = simple_clipping_total_rho(1.0, 1e-5).unwrap();
        let mut ledger_t = CdpLedger::new(total);
        for _ in 0..7 {
            ledger_t.spend(step).unwrap();
        }
        assert!(ledger_t.spend(step).is_err());
        assert_eq!(ledger_t.spends(), 7);

        ledger.spend(CdpBudget::new(0.6).unwrap()).unwrap();
        assert!(ledger.spend(CdpBudget::new(0.6).unwrap()).is_err());
        assert!((ledger.remaining() - 0.4).abs() < 1e-15);
    }

    #[test]
    fn approx_ledger_allows_exactly_t_steps() {
        let total = ApproxDpBudget::new(0.8, 1e-5).unwrap();
        let step = per_step_dp_budget(total, 25).unwrap();
        let mut ledger = ApproxDpLedger::new(total, step, total.delta() / 2.0).unwrap();
        for _ in 0..25 {
            ledger.spend().unwrap();
        }
        assert!(ledger.spend().is_err());
    }

    proptest! {
        #[test]
        fn roundtrip_conversion_loses(eps in 1e-4f64..10.0, delta in 1e-10f64..0.5) {
            let back = cdp_to_dp(dp_to_cdp(eps).unwrap(), delta).unwrap();
            prop_assert!(back.epsilon() >= eps);
        }

        #[test]
        fn per_step_cdp_composes_within_total(
            eps in 1e-3f64..=1.0,
            log_delta in -8.0f64..-2.0,
            steps in 1usize..=10_000,
        ) {
            let delta = 10f64.powf(log_delta);
            let step = per_step_cdp_budget(eps, delta, steps).unwrap();
            let composed = cdp_compose(&vec![step; steps]).unwrap();
            let dp = cdp_to_dp(composed, delta).unwrap();
            prop_assert!(dp.epsilon() <= eps * (1.0 + 1e-12));
        }

        #[test]
        fn per_step_dp_composes_within_total(
            eps in 1e-3f64..=1.0,
            log_delta in -8.0f64..-2.0,
            steps in 1usize..=10_000,
        ) {
            let total = ApproxDpBudget::new(eps, 10f64.powf(log_delta)).unwrap();
            let step = per_step_dp_budget(total, steps).unwrap();
            let composed = advanced_composition(step, steps, total.delta() / 2.0).unwrap();
            prop_assert!(composed.dominated_by(&total));
        }

        #[test]
        fn monotone_outputs(a in 0.01f64..5.0, b in 0.01f64..5.0, delta in 1e-8f64..0.5) {
            prop_assume!(a < b);
            let ca = cdp_to_dp(CdpBudget::new(a).unwrap(), delta).unwrap();
            let cb = cdp_to_dp(CdpBudget::new(b).unwrap(), delta).unwrap();
            prop_assert!(ca.epsilon() < cb.epsilon());
            prop_assert!(dp_to_cdp(a).unwrap().rho() < dp_to_cdp(b).unwrap().rho());
            let rho = CdpBudget::new(1.0).unwrap();
            let sa = gaussian_noise_scale(SensitivityBound::new(a).unwrap(), rho).unwrap();
            let sb = gaussian_noise_scale(SensitivityBound::new(b).unwrap(), rho).unwrap();
            prop_assert!(sa.sigma2() < sb.sigma2());
            let step = ApproxDpBudget::new(a.min(1.0), 1e-9).unwrap();
            let k1 = advanced_composition(step, 3, delta).unwrap();
            let k2 = advanced_composition(step, 4, delta).unwrap();
            prop_assert!(k1.epsilon() < k2.epsilon());
        }
    }
}
