//! Risk budgeting portfolios for positively homogeneous, sub-additive risk measures.
//!
//! A risk budgeting portfolio `theta` with budgets `b` equalises each asset's
//! Euler risk contribution `theta_i d_i R(theta)` with `b_i R(theta)`. It is
//! obtained by normalising the unique minimiser of `g(R(y)) - sum_i b_i ln y_i`
//! over the positive orthant, which this crate solves with exact evaluators
//! (reference solves) or stochastic gradient methods on return samples.

pub mod allocation;
pub mod bench;
pub mod error;
pub mod models;
pub mod numeric;
pub mod risk;
pub mod solver;

pub use allocation::{
    euler_audit, l1_accuracy, normalize, Budgets, RawAllocation, RiskContributionReport, Weights,
};
pub use error::{RbError, Result};
