//! Responsible portfolio optimization.
//!
//! Mean-variance strategies (exact tangency via the Sharpe-to-QP transform,
//! a relaxed risk-aversion form, and semicovariance variants) with an
//! additive responsibility-score term, plus a PPO-trained policy on a daily
//! rebalancing MDP whose rewards are differential Sharpe/Sortino ratios
//! composed with responsibility scores. A backtest harness evaluates both.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod backtest;
pub mod env;
pub mod error;
pub mod linalg;
pub mod market;
pub mod mvo;
pub mod ppo;
pub mod qp;
pub mod reward;

pub use error::{Error, Result};
