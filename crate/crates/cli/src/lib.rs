// SPDX-License-Identifier: Apache-2.0

//! Benchmark harness: parameter sweeps over the private mean estimators and
//! the private SGD loop, written as CSV with a run manifest.

pub mod config;
pub mod error;
pub mod run;
pub mod summary;

pub use config::{EstimatorKind, ExperimentConfig, FamilyKind, Mode};
pub use error::{CliError, Result};
pub use run::{run, run_records, RunRecord, RunSummary, Status, COLUMNS, SCHEMA_VERSION};
pub use summary::summarize;

use heavydp::privacy::{
    per_step_cdp_budget_unchecked, per_step_dp_budget, shuffle_amplified_group_budget,
    shuffle_regime_bound, simple_clipping_total_rho,
};
use heavydp::ApproxDpBudget;

/// Per-step budgets for a T-step run at total (ε, δ), as `key = value` lines.
/// With `groups = Some(k)` also prints the per-group zCDP budget of the
/// iterative estimator at each step.
pub fn calibrate(eps: f64, delta: f64, steps: usize, groups: Option<usize>) -> Result<String> {
    let err = |e: heavydp::Error| CliError::Invalid(e.to_string());
    let total = ApproxDpBudget::new(eps, delta).map_err(err)?;
    let rho_total = simple_clipping_total_rho(eps, delta).map_err(err)?;
    let rho_step = per_step_cdp_budget_unchecked(eps, delta, steps).map_err(err)?;
    let step_dp = per_step_dp_budget(total, steps).map_err(err)?;
    let mut out = format!(
        "eps = {eps}\ndelta = {delta}\nT = {steps}\nrho_total = {}\nrho_step = {}\neps0 = {}\ndelta0 = {}\n",
        rho_total.rho(),
        rho_step.rho(),
        step_dp.epsilon(),
        step_dp.delta()
    );
    if let Some(k) = groups {
        out.push_str(&format!("k = {k}\neps0_max = {}\n", shuffle_regime_bound(step_dp.delta(), k)));
        match shuffle_amplified_group_budget(step_dp, k) {
            Ok(b) => out.push_str(&format!("rho_group = {}\n", b.rho())),
            Err(e) => out.push_str(&format!("rho_group = none ({e})\n")),
        }
    }
    if eps > 1.0 {
        out.push_str("warning = eps > 1: the zCDP split does not certify (eps, delta)-DP\n");
    }
    Ok(out)
}
