// SPDX-License-Identifier: Apache-2.0

use thiserror::Error;

/// Errors raised by the accounting, estimation and optimization routines.
#[derive(Debug, Clone, PartialEq, Error)]
#[non_exhaustive]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A closed-form guarantee was requested outside the parameter range it is proven for.
    #[error("out of regime: {what} (requires {bound})")]
    OutOfRegime { what: String, bound: String },

    #[error("accounting overflow: total delta {delta} is no longer below 1")]
    AccountingOverflow { delta: f64 },

    #[error("privacy budget exceeded: {0}")]
    BudgetExceeded(String),

    #[error("non-finite gradient estimate at step {step}")]
    NonFiniteGradient { step: usize },

    #[error("unsupported problem: {0}")]
    UnsupportedProblem(String),

    #[error("resource limit: {0}")]
    ResourceLimit(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
